//! Norms and dyadic decompositions on the mode lattice.

use std::collections::BTreeMap;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};
use crate::spectral::{
    oversampled_dims, synthesize_complex, ModeIndex, SpectralField, SubspaceTag, AREA, DEFAULT_OVERSAMPLE,
};

/// Relative resonant mass tolerated by norms defined only on `E⊥`.
pub const EPERP_TOL: f64 = 1e-12;

/// Energy norm `‖u‖_E`:
/// `Σ_{2j≠±k} (|Q|/4)|k²−4j²||û|² + Σ_{2j=±k} 4j²|û|² + |û(0,0)|²`, square-rooted.
pub fn norm_e(u: &SpectralField) -> f64 {
    u.iter()
        .map(|(mode, c)| {
            let w = if mode == ModeIndex::ZERO {
                1.0
            } else if mode.is_resonant() {
                4.0 * (mode.j as f64).powi(2)
            } else {
                AREA / 4.0 * mode.symbol().abs()
            };
            w * c.norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

fn require_eperp(u: &SpectralField) -> Result<()> {
    let rel_mass = u.relative_mass_on(SubspaceTag::Kernel);
    if rel_mass > EPERP_TOL {
        return Err(WaveError::NotInEperp { rel_mass });
    }
    Ok(())
}

/// `‖u‖_{E^s} = (Σ_{2j≠±k} |û|²|k²−4j²|^s)^{1/2}` for fields on `E⊥`.
pub fn norm_es(u: &SpectralField, s: f64) -> Result<f64> {
    require_eperp(u)?;
    Ok(u.iter()
        .filter(|(mode, _)| !mode.is_resonant())
        .map(|(mode, c)| mode.symbol().abs().powf(s) * c.norm_sqr())
        .sum::<f64>()
        .sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SobolevConvention {
    /// Weight `4j² + k²`.
    Aniso,
    /// Weight `(2|j| + |k|)²`.
    Ell1,
}

impl SobolevConvention {
    pub fn weight(self, mode: ModeIndex) -> f64 {
        if mode == ModeIndex::ZERO {
            return 1.0;
        }
        let (j, k) = (mode.j as f64, mode.k as f64);
        match self {
            SobolevConvention::Aniso => 4.0 * j * j + k * k,
            SobolevConvention::Ell1 => (mode.weight() as f64).powi(2),
        }
    }
}

/// `(Σ w(j,k)^s |û|²)^{1/2}`; the constant mode has weight 1.
pub fn sobolev_norm(u: &SpectralField, s: f64, convention: SobolevConvention) -> f64 {
    u.iter()
        .map(|(mode, c)| convention.weight(mode).powf(s) * c.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

fn sum_abs_pow(u: &SpectralField, p: f64, oversample: usize) -> (f64, usize) {
    let (nx, nt) = oversampled_dims(u.truncation(), oversample);
    let vals = synthesize_complex(u, nx, nt);
    let sum = if p == 2.0 {
        vals.iter().map(|c| c.norm_sqr()).sum()
    } else {
        vals.iter().map(|c| c.norm().powf(p)).sum()
    };
    (sum, nx * nt)
}

/// `(∫_Q |u|^p)^{1/p}` by trapezoid quadrature on the oversampled grid.
pub fn norm_lp(u: &SpectralField, p: f64, oversample: usize) -> f64 {
    let (sum, n) = sum_abs_pow(u, p, oversample);
    (AREA * sum / n as f64).powf(1.0 / p)
}

/// Measure-normalized `((1/|Q|)∫_Q |u|^p)^{1/p}`.
pub fn norm_lp_normalized(u: &SpectralField, p: f64, oversample: usize) -> f64 {
    let (sum, n) = sum_abs_pow(u, p, oversample);
    (sum / n as f64).powf(1.0 / p)
}

/// Coefficient `ℓ^q` norm.
pub fn norm_lq(u: &SpectralField, q: f64) -> f64 {
    u.iter().map(|(_, c)| c.norm().powf(q)).sum::<f64>().powf(1.0 / q)
}

/// Block index of a mode weight: block 0 is `w ≤ 2`, block `m ≥ 1` is `2^m < w ≤ 2^{m+1}`.
pub fn block_of(weight: usize) -> usize {
    if weight <= 2 {
        0
    } else {
        let mut m = 1;
        while weight > 2 << m {
            m += 1;
        }
        m
    }
}

/// Upper weight bound `2·2^m` of block `m`.
pub fn block_top(m: usize) -> usize {
    2 << m
}

#[derive(Clone, Debug, PartialEq)]
pub struct DyadicDecomposition {
    truncation: usize,
    /// `(m, Δ_m u)`; each block is stored at truncation `min(M, 2·2^m)`.
    pub blocks: Vec<(usize, SpectralField)>,
}

impl DyadicDecomposition {
    /// Sum of all blocks at the original truncation.
    pub fn sum(&self) -> SpectralField {
        let mut out = SpectralField::zeros(self.truncation);
        for (_, b) in &self.blocks {
            out.axpy(1.0, &b.resized(self.truncation));
        }
        out
    }
}

/// Littlewood–Paley blocks `Δ_m u`, `m = 0..=block_of(M)`.
pub fn dyadic_blocks(u: &SpectralField) -> DyadicDecomposition {
    let m_max = u.truncation();
    let top = block_of(m_max.max(1));
    let mut blocks: Vec<(usize, SpectralField)> = (0..=top)
        .map(|m| (m, SpectralField::zeros(block_top(m).min(m_max))))
        .collect();
    for (mode, c) in u.iter() {
        if c != Complex64::new(0.0, 0.0) {
            blocks[block_of(mode.weight())].1.set(mode, c);
        }
    }
    DyadicDecomposition {
        truncation: m_max,
        blocks,
    }
}

/// Grid maximum of `|u|` at the given oversampling. This is a lower bound on
/// the true supremum, with a spectrally small gap.
pub fn grid_max(u: &SpectralField, oversample: usize) -> f64 {
    let (nx, nt) = oversampled_dims(u.truncation(), oversample);
    synthesize_complex(u, nx, nt)
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max)
}

/// Block Hölder–Zygmund proxy `sup_m 2^{γm} ‖Δ_m u‖_{C⁰}`.
pub fn holder_estimate(u: &SpectralField, gamma: f64) -> f64 {
    holder_estimate_with(u, gamma, DEFAULT_OVERSAMPLE)
}

pub fn holder_estimate_with(u: &SpectralField, gamma: f64, oversample: usize) -> f64 {
    dyadic_blocks(u)
        .blocks
        .iter()
        .filter(|(_, b)| !b.is_zero())
        .map(|(m, b)| 2f64.powf(gamma * *m as f64) * grid_max(b, oversample))
        .fold(0.0, f64::max)
}

/// Sign-quadrant pieces `(u⁺⁺, u⁺⁻, u⁻⁺, u⁻⁻)`; the pieces are complex fields.
pub fn quadrant_split(u: &SpectralField) -> [SpectralField; 4] {
    let zero = Complex64::new(0.0, 0.0);
    let pick = |jpos: bool, kpos: bool| {
        u.map(|mode, c| {
            if (mode.j >= 0) == jpos && (mode.k >= 0) == kpos {
                c
            } else {
                zero
            }
        })
    };
    [
        pick(true, true),
        pick(true, false),
        pick(false, true),
        pick(false, false),
    ]
}

/// One evaluated norm with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub name: String,
    pub value: f64,
    pub params: BTreeMap<String, serde_json::Value>,
}

impl NormReport {
    pub fn new(name: &str, value: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }
}

/// The standard norm panel for a field.
pub fn norm_panel(u: &SpectralField, oversample: usize) -> Vec<NormReport> {
    let mut rows = vec![
        NormReport::new("E", norm_e(u)),
        NormReport::new("l2", u.l2_norm()).with("q", 2.0),
        NormReport::new("l1", norm_lq(u, 1.0)).with("q", 1.0),
        NormReport::new("L2", norm_lp(u, 2.0, oversample)).with("p", 2.0),
        NormReport::new("L4", norm_lp(u, 4.0, oversample)).with("p", 4.0),
        NormReport::new("C0", grid_max(u, oversample)).with("oversample", oversample as u64),
        NormReport::new("H1", sobolev_norm(u, 1.0, SobolevConvention::Aniso))
            .with("s", 1.0)
            .with("convention", "aniso"),
        NormReport::new("H1", sobolev_norm(u, 1.0, SobolevConvention::Ell1))
            .with("s", 1.0)
            .with("convention", "ell1"),
        NormReport::new("holder", holder_estimate_with(u, 0.5, oversample)).with("gamma", 0.5),
    ];
    let perp = crate::spectral::project(u, SubspaceTag::Eperp);
    for s in [0.5, 1.0] {
        if let Ok(v) = norm_es(&perp, s) {
            rows.push(NormReport::new("Es(perp)", v).with("s", s));
        }
    }
    rows
}

/// Writes `name,value,params` rows; params are JSON-encoded.
pub fn write_norm_csv<W: Write>(out: W, rows: &[NormReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["name", "value", "params"])?;
    for r in rows {
        w.write_record([
            r.name.clone(),
            format!("{:.17e}", r.value),
            serde_json::to_string(&r.params)?,
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{random_field, synthesize_complex};
    use std::f64::consts::PI;

    fn cos_mode(m: usize, j: i32, k: i32) -> SpectralField {
        SpectralField::from_mode_pair(m, ModeIndex::new(j, k), Complex64::new(0.5, 0.0))
    }

    #[test]
    fn energy_norm_examples() {
        let e = norm_e(&cos_mode(6, 1, 3));
        assert!((e * e - 5.0 * PI * PI / 4.0).abs() < 1e-12);
        assert!((norm_e(&SpectralField::constant(3, 1.0)) - 1.0).abs() < 1e-15);
        let r = norm_e(&cos_mode(6, 1, 2));
        assert!((r * r - 2.0).abs() < 1e-14);
    }

    #[test]
    fn es_norm_examples() {
        let u = cos_mode(6, 1, 3);
        assert!((norm_es(&u, 1.0).unwrap() - 2.5f64.sqrt()).abs() < 1e-14);
        let t = cos_mode(4, 0, 1);
        for s in [0.1, 0.5, 1.0] {
            assert!((norm_es(&t, s).unwrap() - t.l2_norm()).abs() < 1e-15);
        }
        assert!(matches!(
            norm_es(&cos_mode(6, 1, 2), 0.5),
            Err(WaveError::NotInEperp { .. })
        ));
    }

    #[test]
    fn es_monotone_in_s() {
        for seed in 0..20 {
            let u = random_field(seed, 16, SubspaceTag::Eperp, 0.0);
            let mut last = 0.0;
            for s in [0.1, 0.3, 0.6, 1.0] {
                let v = norm_es(&u, s).unwrap();
                assert!(v >= last);
                last = v;
            }
        }
    }

    #[test]
    fn sobolev_examples() {
        let u = cos_mode(4, 0, 1);
        assert!((sobolev_norm(&u, 1.0, SobolevConvention::Aniso) - 0.5f64.sqrt()).abs() < 1e-15);
        let r = random_field(2, 12, SubspaceTag::All, 0.1);
        for conv in [SobolevConvention::Aniso, SobolevConvention::Ell1] {
            assert!((sobolev_norm(&r, 0.0, conv) - r.l2_norm()).abs() < 1e-13);
        }
    }

    #[test]
    fn sobolev_conventions_equivalent() {
        for mode in crate::spectral::lattice_modes(40) {
            let a = SobolevConvention::Aniso.weight(mode);
            let e = SobolevConvention::Ell1.weight(mode);
            assert!(a <= e && e <= 2.0 * a, "{mode}");
        }
        for seed in 0..20 {
            let u = random_field(seed, 20, SubspaceTag::All, 0.0);
            let ratio =
                sobolev_norm(&u, 1.0, SobolevConvention::Aniso) / sobolev_norm(&u, 1.0, SobolevConvention::Ell1);
            assert!((0.5..=2.0).contains(&ratio));
        }
    }

    #[test]
    fn lp_examples() {
        let c = SpectralField::constant(2, -3.0);
        for p in [1.0, 2.0, 3.5] {
            assert!((norm_lp(&c, p, 4) - 3.0 * AREA.powf(1.0 / p)).abs() < 1e-12);
        }
        // ∫_0^π dx ∫_0^{2π} cos²t dt = π²
        let u = cos_mode(4, 0, 1);
        assert!((norm_lp(&u, 2.0, 4) - PI).abs() < 1e-13);
        for seed in 0..10 {
            let r = random_field(seed, 12, SubspaceTag::All, 0.1);
            let lhs = norm_lp(&r, 2.0, 4);
            let rhs = AREA.sqrt() * r.l2_norm();
            assert!((lhs - rhs).abs() <= 1e-10 * rhs);
        }
    }

    #[test]
    fn lq_examples() {
        let mut u = SpectralField::zeros(4);
        u.set(ModeIndex::new(1, 1), Complex64::new(0.0, 1.0));
        for q in [1.0, 1.5, 2.0, 7.0] {
            assert!((norm_lq(&u, q) - 1.0).abs() < 1e-15);
        }
        u.set(ModeIndex::new(0, 2), Complex64::new(1.0, 0.0));
        assert!((norm_lq(&u, 1.0) - 2.0).abs() < 1e-15);
        assert!((norm_lq(&u, 2.0) - 2f64.sqrt()).abs() < 1e-15);
        let r = random_field(4, 10, SubspaceTag::All, 0.2);
        assert!(norm_lq(&r, 3.0) <= norm_lq(&r, 1.5));
    }

    #[test]
    fn block_membership() {
        assert_eq!(block_of(0), 0);
        assert_eq!(block_of(2), 0);
        assert_eq!(block_of(3), 1);
        assert_eq!(block_of(4), 1);
        assert_eq!(block_of(5), 2);
        assert_eq!(block_of(8), 2);
        assert_eq!(block_of(9), 3);
        let d = dyadic_blocks(&cos_mode(8, 1, 0));
        assert!(!d.blocks[0].1.is_zero());
        assert!(d.blocks[1..].iter().all(|(_, b)| b.is_zero()));
        let d = dyadic_blocks(&cos_mode(8, 0, 3));
        assert!(!d.blocks[1].1.is_zero());
        assert_eq!(d.blocks.len(), 3);
    }

    #[test]
    fn blocks_partition() {
        let u = random_field(8, 33, SubspaceTag::All, 0.0);
        let d = dyadic_blocks(&u);
        assert_eq!(d.sum(), u);
        for (m, b) in &d.blocks {
            for (mode, c) in b.iter() {
                if c.norm() > 0.0 {
                    assert_eq!(block_of(mode.weight()), *m);
                }
            }
        }
    }

    #[test]
    fn holder_examples() {
        let h = holder_estimate(&cos_mode(8, 0, 3), 0.5);
        assert!((h - 2f64.sqrt()).abs() < 1e-12);
        for g in [0.1, 0.5, 0.9] {
            assert!((holder_estimate(&cos_mode(8, 1, 0), g) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn holder_lacunary() {
        let gamma = 0.4;
        let mut u = SpectralField::zeros(48);
        for m in 1..=5 {
            let k = 3 * (1 << (m - 1));
            u.set_pair(
                ModeIndex::new(0, k),
                Complex64::new(0.5 * 2f64.powf(-gamma * m as f64), 0.0),
            );
        }
        assert!((holder_estimate(&u, gamma) - 1.0).abs() < 0.01);
    }

    #[test]
    fn holder_scaling_and_monotone() {
        let u = random_field(5, 24, SubspaceTag::All, 0.05);
        let h = holder_estimate(&u, 0.3);
        assert!((holder_estimate(&u.scaled(-2.5), 0.3) - 2.5 * h).abs() <= 1e-12 * h);
        assert!(holder_estimate(&u, 0.2) <= holder_estimate(&u, 0.6));
    }

    #[test]
    fn quadrant_examples() {
        let mut e = SpectralField::zeros(4);
        e.set(ModeIndex::new(1, 1), Complex64::new(1.0, 0.0));
        let q = quadrant_split(&e);
        assert_eq!(q[0], e);
        assert!(q[1..].iter().all(|p| p.is_zero()));

        let u = cos_mode(4, 1, 1);
        let q = quadrant_split(&u);
        assert!((q[0].get(ModeIndex::new(1, 1)).re - 0.5).abs() < 1e-15);
        assert!((q[3].get(ModeIndex::new(-1, -1)).re - 0.5).abs() < 1e-15);
        assert!(q[1].is_zero() && q[2].is_zero());
        // the pieces of a real field are complex
        let g = synthesize_complex(&q[0], 10, 10);
        assert!(g.iter().any(|c| c.im.abs() > 0.1));
    }

    #[test]
    fn quadrant_parseval() {
        let u = random_field(12, 16, SubspaceTag::All, 0.0);
        let q = quadrant_split(&u);
        let mut sum = SpectralField::zeros(16);
        for p in &q {
            sum.axpy(1.0, p);
        }
        assert_eq!(sum, u);
        let sq: f64 = q.iter().map(|p| p.l2_norm_sq()).sum();
        assert!((sq - u.l2_norm_sq()).abs() <= 1e-13 * u.l2_norm_sq());
    }

    #[test]
    fn csv_export() {
        let rows = norm_panel(&cos_mode(4, 0, 1), 4);
        let mut buf = Vec::new();
        write_norm_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("name,value,params"));
        assert_eq!(text.lines().count(), rows.len() + 1);
    }
}
