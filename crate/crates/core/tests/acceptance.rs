//! One test per acceptance criterion. Each prints a single
//! `ACCEPT <n> PASS|FAIL <name>: <details>` line straight to stdout, so the
//! lines appear even when the harness captures output.

use std::io::Write;
use std::time::Instant;

use num_complex::Complex64;
use wavetorus::dalembert::h1_bound_ratio;
use wavetorus::nonlinearity::{make_nonlinearity, NonlinearitySpec};
use wavetorus::norms::holder_estimate;
use wavetorus::solver::{
    continuation_beta, linking_report, multi_seed_search, pairing, translation_correlation, BetaSchedule,
    LinkingOptions, NewtonOptions, PenalizedProblem, SearchOptions, Sign, SolutionState,
};
use wavetorus::spectral::random_field;
use wavetorus::verify::{self, EnsembleSpec, MmsOptions};
use wavetorus::{ModeIndex, SpectralField, SubspaceTag};

fn report(n: u32, name: &str, pass: bool, details: String) {
    let line = format!(
        "ACCEPT {n:>2} {} {name}: {details}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(pass, "criterion {n} ({name}) failed: {details}");
}

fn default_problem(m: usize, beta: f64, sigma: Sign) -> PenalizedProblem {
    let nl = make_nonlinearity(NonlinearitySpec::default_cubic()).unwrap();
    PenalizedProblem::new(m, beta, sigma, nl).unwrap()
}

fn gap_ok(p: &PenalizedProblem, s: &SolutionState) -> bool {
    p.critical_identity_gap(&s.u) <= 1e-8 * (1.0 + s.i_value.abs())
}

#[test]
fn c01_box_round_trip() {
    let rep = verify::check_box_roundtrip(&EnsembleSpec::new(1000, 32, 101)).unwrap();
    report(
        1,
        "box round trip",
        rep.violation_count == 0 && rep.ratios.max <= 1e-12,
        format!("1000 fields, M=32, max relative error {:.2e}", rep.ratios.max),
    );
}

#[test]
fn c02_h1_sharp_bound() {
    let rep = verify::check_h1_bound(&EnsembleSpec::new(1000, 32, 102)).unwrap();
    let witness = SpectralField::from_mode_pair(8, ModeIndex::new(0, 1), Complex64::new(0.5, 0.0));
    let w = h1_bound_ratio(&witness).unwrap();
    report(
        2,
        "H1 sharp bound",
        rep.violation_count == 0 && rep.ratios.max <= 1.0 && (w - 1.0).abs() <= 1e-12,
        format!(
            "1000 fields, {} violations, max ratio {:.6}, witness (0,±1) ratio {:.15}",
            rep.violation_count, rep.ratios.max, w
        ),
    );
}

#[test]
fn c03_hausdorff_young() {
    let ens = EnsembleSpec::new(1000, 32, 103);
    let mut parts = Vec::new();
    let mut pass = true;
    for p in [4.0 / 3.0, 1.5, 2.0] {
        let rep = verify::check_hausdorff_young(&ens, p).unwrap();
        pass &= rep.violation_count == 0;
        parts.push(format!(
            "p={p:.3}: {} violations, max {:.6}",
            rep.violation_count, rep.ratios.max
        ));
    }
    report(3, "Hausdorff-Young", pass, format!("1000 fields; {}", parts.join("; ")));
}

#[test]
fn c04_holder_estimator() {
    let gamma = 0.4;
    let mut lac = SpectralField::zeros(48);
    for m in 1..=5 {
        let k = 3 * (1 << (m - 1));
        lac.set_pair(
            ModeIndex::new(0, k),
            Complex64::new(0.5 * 2f64.powf(-gamma * m as f64), 0.0),
        );
    }
    let lacunary = holder_estimate(&lac, gamma);
    let (mut homogeneous, mut monotone) = (true, true);
    for i in 0..100 {
        let u = random_field(4000 + i, 24, SubspaceTag::All, 0.1 + 0.004 * i as f64);
        let h = holder_estimate(&u, 0.5);
        homogeneous &= holder_estimate(&u.scaled(-2.0), 0.5) == 2.0 * h;
        homogeneous &= (holder_estimate(&u.scaled(0.37), 0.5) - 0.37 * h).abs() <= 1e-12 * h;
        let gs = [0.1, 0.3, 0.5, 0.7, 0.9];
        let hs: Vec<f64> = gs.iter().map(|&g| holder_estimate(&u, g)).collect();
        monotone &= hs.windows(2).all(|w| w[0] <= w[1]);
    }
    report(
        4,
        "Holder estimator",
        (lacunary - 1.0).abs() <= 0.01 && homogeneous && monotone,
        format!("lacunary estimate {lacunary:.6}; homogeneity {homogeneous}, monotonicity {monotone} on 100 fields"),
    );
}

#[test]
fn c05_regularity_shadow() {
    let ens = EnsembleSpec::new(1000, 32, 105);
    let a = verify::check_regularity(&ens, 2.0, 0.45).unwrap();
    let b = verify::check_regularity(&ens.with_truncation(64), 2.0, 0.45).unwrap();
    let growth = b.ratios.max / a.ratios.max - 1.0;
    report(
        5,
        "regularity estimate shadow",
        growth <= 0.05,
        format!(
            "(p,γ)=(2,0.45), 1000 fields: max {:.6} at M=32, {:.6} at M=64, growth {:+.3}%",
            a.ratios.max,
            b.ratios.max,
            100.0 * growth
        ),
    );
}

#[test]
fn c06_gn_and_embedding() {
    let mut pass = true;
    let mut parts = Vec::new();
    for p in [3.0, 4.0] {
        let ens = EnsembleSpec::new(400, 32, 106);
        let a = verify::check_gn(&ens, p).unwrap();
        let b = verify::check_gn(&ens.with_truncation(64), p).unwrap();
        let g = b.ratios.max / a.ratios.max - 1.0;
        pass &= g <= 0.05;
        parts.push(format!("GN p={p}: growth {:+.3}%", 100.0 * g));
        let s = verify::gn_exponent(p);
        let a = verify::check_embedding(&ens, s, &[]).unwrap().report;
        let b = verify::check_embedding(&ens.with_truncation(64), s, &[])
            .unwrap()
            .report;
        let g = b.ratios.max / a.ratios.max - 1.0;
        pass &= g <= 0.05;
        let tail = verify::check_embedding(&EnsembleSpec::new(50, 16, 206), s, &[8, 16, 32, 64]).unwrap();
        pass &= tail.tail_strictly_decreasing;
        let maxima: Vec<String> = tail.tail.iter().map(|t| format!("{:.3}", t.max_ratio)).collect();
        parts.push(format!(
            "E^s s={s:.3}: growth {:+.3}%, tail maxima [{}]",
            100.0 * g,
            maxima.join(", ")
        ));
    }
    report(6, "Gagliardo-Nirenberg and embedding", pass, parts.join("; "));
}

#[test]
fn c07_gradient_consistency() {
    let mut worst: f64 = 0.0;
    for sigma in [Sign::Plus, Sign::Minus] {
        for beta in [1e-1, 1e-4] {
            let p = default_problem(12, beta, sigma);
            for i in 0..50u64 {
                let u = random_field(7000 + i, 12, SubspaceTag::All, 0.3);
                let phi = random_field(8000 + i, 12, SubspaceTag::All, 0.3);
                let h = 1e-5;
                let mut up = u.clone();
                up.axpy(h, &phi);
                let mut um = u.clone();
                um.axpy(-h, &phi);
                let fd = (p.functional_i(&up) - p.functional_i(&um)) / (2.0 * h);
                let exact = pairing(&p.residual(&u), &phi);
                worst = worst.max((fd - exact).abs() / exact.abs().max(1e-300));
            }
        }
    }
    report(
        7,
        "gradient consistency",
        worst <= 1e-5,
        format!("200 (u,φ) pairs over σ=±1, β∈{{1e-1,1e-4}}: worst relative mismatch {worst:.2e}"),
    );
}

#[test]
fn c08_mms_convergence() {
    // the unique-solution variant of the default shape; see README
    let nl = make_nonlinearity(NonlinearitySpec::mild_cubic()).unwrap();
    let opts = MmsOptions {
        decay: 0.5,
        m_list: vec![8, 12, 16, 20, 24],
        beta: 1e-3,
        sigma: Sign::Plus,
        seed: 4,
        newton: NewtonOptions::default(),
    };
    let start = Instant::now();
    let table = verify::mms_run(&nl, &opts).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let errors: Vec<f64> = table.rows.iter().map(|r| r.error).collect();
    let ratios = table.error_ratios();
    let monotone = ratios.iter().all(|&r| r < 1.0);
    // geometric: the ratios before the last level stay near e^{-2·decay·ΔM}·(const)
    let geometric = ratios[..ratios.len() - 1].iter().all(|&r| r > 0.05 && r < 0.3);
    let iters_ok = table.rows.iter().all(|r| r.converged && r.newton_iters <= 10);
    let last = *errors.last().unwrap();
    let pass = monotone && geometric && iters_ok && last <= 1e-9 && elapsed <= 120.0;
    let errs: Vec<String> = errors.iter().map(|e| format!("{e:.2e}")).collect();
    report(
        8,
        "MMS convergence",
        pass,
        format!(
            "errors [{}], max Newton iterations {}, {:.2}s",
            errs.join(", "),
            table.rows.iter().map(|r| r.newton_iters).max().unwrap(),
            elapsed
        ),
    );
}

fn continuation_seed(p: &PenalizedProblem) -> SpectralField {
    multi_seed_search(p, &SearchOptions::default())
        .into_iter()
        .max_by(|a, b| {
            a.u.mass_on(SubspaceTag::Kernel)
                .total_cmp(&b.u.mass_on(SubspaceTag::Kernel))
        })
        .expect("at least the trivial solution")
        .u
}

#[test]
fn c09_continuation_bounds() {
    let p = default_problem(24, 1e-1, Sign::Plus);
    let seed = continuation_seed(&p);
    let schedule = BetaSchedule {
        start: 1e-1,
        factor: 0.5,
        floor: 1e-6,
    };
    let trace = continuation_beta(&p, &schedule, &seed, &NewtonOptions::default()).unwrap();
    let apriori = verify::apriori_monitor(&trace, 10.0).unwrap();
    let spread: Vec<String> = apriori
        .quantities
        .iter()
        .map(|q| format!("{} {:.3}", q.name, q.ratio))
        .collect();
    report(
        9,
        "beta-continuation bounds",
        trace.is_complete() && apriori.all_within && apriori.beta_min <= 1e-6,
        format!(
            "{} rows β {:.0e}→{:.0e}, kernel mass of seed {:.3}; max/min: {}",
            apriori.rows,
            apriori.beta_max,
            apriori.beta_min,
            seed.mass_on(SubspaceTag::Kernel),
            spread.join(", ")
        ),
    );
}

#[test]
fn c10_critical_point_identity() {
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    let mut pass = true;
    let mut note = |p: &PenalizedProblem, s: &SolutionState| {
        checked += 1;
        worst = worst.max(p.critical_identity_gap(&s.u) / (1.0 + s.i_value.abs()));
        pass &= gap_ok(p, s);
    };
    for sigma in [Sign::Plus, Sign::Minus] {
        let p = default_problem(16, 1e-3, sigma);
        for s in multi_seed_search(
            &p,
            &SearchOptions {
                n_seeds: 12,
                ..Default::default()
            },
        ) {
            note(&p, &s);
        }
    }
    let nl = make_nonlinearity(NonlinearitySpec::mild_cubic()).unwrap();
    let mild = PenalizedProblem::new(12, 1e-3, Sign::Plus, nl).unwrap();
    let target = random_field(5, 12, SubspaceTag::All, 0.5);
    let forced = mild.clone().with_forcing(mild.unforced_residual(&target)).unwrap();
    let s = wavetorus::solver::newton_solve(&forced, &SpectralField::zeros(12), &NewtonOptions::default()).unwrap();
    note(&forced, &s);
    report(
        10,
        "critical-point identity",
        pass,
        format!("{checked} converged solutions, worst gap/(1+|I|) {worst:.2e}"),
    );
}

#[test]
fn c11_multiplicity_and_linking() {
    let p = default_problem(24, 1e-4, Sign::Plus);
    let sols = multi_seed_search(&p, &SearchOptions::default());
    let mut distinct_pairs = true;
    for (a, sa) in sols.iter().enumerate() {
        for sb in &sols[a + 1..] {
            distinct_pairs &= translation_correlation(&sa.u, &sb.u) < 0.99;
            distinct_pairs &= (sa.i_value - sb.i_value).abs() > 1e-8 * (1.0 + sa.i_value.abs());
        }
    }
    let levels: Vec<String> = sols.iter().map(|s| format!("{:.3}", s.i_value)).collect();
    let opts = LinkingOptions {
        n_starts: 2,
        n_sphere_samples: 16,
        ..Default::default()
    };
    let mut linking_ok = true;
    let mut maxima = Vec::new();
    for sigma in [Sign::Plus, Sign::Minus] {
        let rep = linking_report(&default_problem(16, 1e-4, sigma), &[4, 8, 12, 16], &opts).unwrap();
        linking_ok &= rep.nondecreasing;
        let ms: Vec<String> = rep.rows.iter().map(|r| format!("{:.1}", r.max_value)).collect();
        maxima.push(format!("σ={}: M(l) [{}]", sigma.value(), ms.join(", ")));
    }
    report(
        11,
        "multiplicity and linking levels",
        sols.len() >= 2 && distinct_pairs && linking_ok,
        format!(
            "{} distinct solutions, I = [{}]; {}",
            sols.len(),
            levels.join(", "),
            maxima.join("; ")
        ),
    );
}
