//! The three worked examples, scenario files and random perturbations.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::divisors::{check_divisors_nonvanishing, estimate_sigma_and_k};
use crate::error::ModelError;
use crate::linalg;
use crate::model::{
    check_a1_doubleprime, check_a1_rank, normal_hessian_map, pullback_normal_form, pullback_with_local_perturbation,
    KamParams, ModelHamiltonian, ParamChart, SpectrumClass,
};
use crate::poly::{parse_poly, phase_names};
use crate::series::{is_canonical_half, l1_ball, Dims, FtSeries, MultiIndex, NormWeights};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartKind {
    Line,
    Parabola,
}

/// Claimed outcome of the condition checks on the chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectations {
    pub a1_prime: bool,
    pub a_singular: bool,
    pub rank_a: usize,
    pub spectrum: SpectrumClass,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationSpec {
    pub k_max: u32,
    pub deg_max: u32,
    /// Majorant norm at the initial weights; `None` means
    /// `eps0 s0^2 gamma0^{4m^2(n+1)}`.
    pub amplitude: Option<f64>,
    pub seed: u64,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        PerturbationSpec { k_max: 4, deg_max: 2, amplitude: None, seed: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSection {
    /// `y_i` as polynomials in `l1..l{n0}`.
    pub map: Vec<String>,
    pub domain: Vec<[f64; 2]>,
    pub grid: Vec<usize>,
}

/// On-disk scenario layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub n: usize,
    pub m: usize,
    /// Integrable part in `y1..yn, u1, v1, .., um, vm`.
    pub hamiltonian: String,
    pub chart: ChartSection,
    #[serde(default)]
    pub perturbation: PerturbationSpec,
    #[serde(default)]
    pub kam: KamParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Expectations>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub dims: Dims,
    pub hamiltonian: String,
    pub n_full: FtSeries,
    pub chart: ParamChart,
    pub perturbation: PerturbationSpec,
    pub kam: KamParams,
    pub expect: Option<Expectations>,
}

impl Scenario {
    pub fn from_file(f: &ScenarioFile) -> Result<Self, ModelError> {
        let dims = Dims::new(f.n, f.m)?;
        let names = phase_names(dims);
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let n_full = parse_poly(&f.hamiltonian, &refs)?.to_series(dims)?;
        if f.chart.map.len() != dims.n {
            return Err(ModelError::ScenarioFile(format!(
                "chart.map has {} entries, expected n = {}",
                f.chart.map.len(),
                dims.n
            )));
        }
        let chart = ParamChart::parse(f.chart.domain.clone(), &f.chart.map, f.chart.grid.clone())?;
        let k = &f.kam;
        for (name, v) in [("eps0", k.eps0), ("gamma0", k.gamma0), ("r0", k.r0)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(ModelError::ScenarioFile(format!("kam.{name} = {v} must lie in (0, 1)")));
            }
        }
        if let Some(a) = f.perturbation.amplitude {
            if !(a >= 0.0) {
                return Err(ModelError::ScenarioFile(format!("perturbation.amplitude = {a} must be >= 0")));
            }
        }
        Ok(Scenario {
            name: f.name.clone(),
            dims,
            hamiltonian: f.hamiltonian.clone(),
            n_full,
            chart,
            perturbation: f.perturbation.clone(),
            kam: f.kam,
            expect: f.expect.clone(),
        })
    }

    pub fn to_file(&self) -> ScenarioFile {
        ScenarioFile {
            name: self.name.clone(),
            n: self.dims.n,
            m: self.dims.m,
            hamiltonian: self.hamiltonian.clone(),
            chart: ChartSection {
                map: self.chart.map_exprs(),
                domain: self.chart.domain.clone(),
                grid: self.chart.grid.clone(),
            },
            perturbation: self.perturbation.clone(),
            kam: self.kam,
            expect: self.expect.clone(),
        }
    }

    pub fn from_toml(src: &str) -> Result<Self, ModelError> {
        let f: ScenarioFile = toml::from_str(src).map_err(|e| ModelError::ScenarioFile(e.to_string()))?;
        Self::from_file(&f)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_file()).expect("scenario serializes")
    }

    pub fn initial_weights(&self) -> NormWeights {
        NormWeights::new(self.kam.r0, self.kam.s0(self.dims)).expect("validated parameters")
    }

    /// `eps0 s0^2 gamma0^{4m^2(n+1)}`.
    pub fn default_amplitude(&self) -> f64 {
        let w = self.initial_weights();
        self.kam.eps0 * w.s * w.s * self.kam.gamma0.powi(crate::model::gamma_exponent(self.dims))
    }

    /// The scenario perturbation, in coordinates centred on the torus.
    pub fn local_perturbation(&self) -> FtSeries {
        let amp = self.perturbation.amplitude.unwrap_or_else(|| self.default_amplitude());
        random_perturbation(
            self.dims,
            self.perturbation.k_max,
            self.perturbation.deg_max,
            amp,
            self.initial_weights(),
            self.perturbation.seed,
        )
    }

    /// `N + P` pulled back to the torus at `y(lambda)`.
    pub fn model_at(&self, lambda: &[f64], p_local: &FtSeries) -> Result<ModelHamiltonian, ModelError> {
        pullback_with_local_perturbation(&self.n_full, p_local, &self.chart, lambda, &self.kam)
    }

    /// The full Hamiltonian in coordinates centred at `y(lambda)`.
    pub fn local_hamiltonian(&self, lambda: &[f64], p_local: &FtSeries) -> Result<FtSeries, ModelError> {
        Ok(self.n_full.shift_y(&self.chart.eval(lambda))?.add(p_local)?)
    }
}

/// `N = y1 + y2^2/2 + (sqrt2/2)(u^2 + v^2)` on `y = (a1 l, a2 l)` or
/// `(a1 l, a2 l^2)`, `l in [1, 2]`.
pub fn ex41(a1: f64, a2: f64, kind: ChartKind) -> Scenario {
    let map = chart_map(a1, a2, kind);
    let f = ScenarioFile {
        name: format!("ex41-{}", kind_name(kind)),
        n: 2,
        m: 1,
        hamiltonian: "y1 + 0.5*y2^2 + sqrt(2)/2*(u1^2 + v1^2)".into(),
        chart: ChartSection { map, domain: vec![[1.0, 2.0]], grid: vec![100] },
        perturbation: PerturbationSpec::default(),
        kam: KamParams::default(),
        expect: Some(Expectations { a1_prime: a2 != 0.0, a_singular: true, rank_a: 1, spectrum: SpectrumClass::Elliptic }),
    };
    Scenario::from_file(&f).expect("builtin scenario is valid")
}

/// `N = y1^2/2 + y2^3/3 + (sqrt2/2)(u1^2 + v1^2) + (sqrt3/2)(u2^2 + v2^2)`.
pub fn ex42(a1: f64, a2: f64, kind: ChartKind) -> Scenario {
    let map = chart_map(a1, a2, kind);
    let f = ScenarioFile {
        name: format!("ex42-{}", kind_name(kind)),
        n: 2,
        m: 2,
        hamiltonian: "0.5*y1^2 + y2^3/3 + sqrt(2)/2*(u1^2 + v1^2) + sqrt(3)/2*(u2^2 + v2^2)".into(),
        chart: ChartSection { map, domain: vec![[1.0, 2.0]], grid: vec![100] },
        perturbation: PerturbationSpec::default(),
        kam: KamParams::default(),
        expect: Some(Expectations {
            a1_prime: a1 * a2 != 0.0,
            a_singular: a2 == 0.0,
            rank_a: if a2 == 0.0 { 1 } else { 2 },
            spectrum: SpectrumClass::Elliptic,
        }),
    };
    Scenario::from_file(&f).expect("builtin scenario is valid")
}

/// `N = |y|^2/2 + (u1^2 - v1^2)/2 + u2^2/2 - 3 v2^2/2` on the plane
/// `y3 = a`, parametrized by `(y1, y2) in [1, 2]^2`.
pub fn ex43(a: f64) -> Result<Scenario, ModelError> {
    if a == 0.0 {
        return Err(ModelError::Invalid("the plane y3 = a needs a != 0".into()));
    }
    let f = ScenarioFile {
        name: "ex43".into(),
        n: 3,
        m: 2,
        hamiltonian: "0.5*y1^2 + 0.5*y2^2 + 0.5*y3^2 + 0.5*(u1^2 - v1^2) + 0.5*u2^2 - 1.5*v2^2".into(),
        chart: ChartSection {
            map: vec!["l1".into(), "l2".into(), format!("{a:?}")],
            domain: vec![[1.0, 2.0], [1.0, 2.0]],
            grid: vec![100, 100],
        },
        perturbation: PerturbationSpec::default(),
        kam: KamParams::default(),
        expect: Some(Expectations { a1_prime: true, a_singular: false, rank_a: 3, spectrum: SpectrumClass::Hyperbolic }),
    };
    Scenario::from_file(&f)
}

fn kind_name(kind: ChartKind) -> &'static str {
    match kind {
        ChartKind::Line => "line",
        ChartKind::Parabola => "parabola",
    }
}

fn chart_map(a1: f64, a2: f64, kind: ChartKind) -> Vec<String> {
    let second = match kind {
        ChartKind::Line => format!("{a2:?}*l1"),
        ChartKind::Parabola => format!("{a2:?}*l1^2"),
    };
    vec![format!("{a1:?}*l1"), second]
}

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 5] = ["ex41-line", "ex41-parabola", "ex42-line", "ex42-parabola", "ex43"];

/// A builtin scenario by name, with optional `,key=value` overrides of the
/// chart coefficients (`a1`, `a2`, or `a` for `ex43`).
pub fn builtin(spec: &str) -> Result<Scenario, ModelError> {
    let mut parts = spec.split(',');
    let name = parts.next().unwrap_or("").trim();
    let mut a1 = 1.0;
    let mut a2 = 1.0;
    let mut a = 1.0;
    for kv in parts {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| ModelError::ScenarioFile(format!("override `{kv}` is not key=value")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| ModelError::ScenarioFile(format!("override `{kv}` has a non-numeric value")))?;
        match k.trim() {
            "a1" => a1 = v,
            "a2" => a2 = v,
            "a" => a = v,
            other => return Err(ModelError::ScenarioFile(format!("unknown override `{other}`"))),
        }
    }
    let mut sc = match name {
        "ex41-line" => ex41(a1, a2, ChartKind::Line),
        "ex41-parabola" => ex41(a1, a2, ChartKind::Parabola),
        "ex42-line" => ex42(a1, a2, ChartKind::Line),
        "ex42-parabola" => ex42(a1, a2, ChartKind::Parabola),
        "ex43" => ex43(a)?,
        other => {
            return Err(ModelError::ScenarioFile(format!(
                "unknown builtin `{other}`; expected one of {}",
                BUILTIN_NAMES.join(", ")
            )))
        }
    };
    sc.name = spec.to_string();
    Ok(sc)
}

/// Real trigonometric polynomial with `0 < |k| <= k_max` or `k = 0`, and
/// `|l| + |p| <= deg_max`, skipping the `k = 0` cells of degree at most one.
/// Each term's weighted size `|c| e^{|k| r} s^{deg}` is drawn uniformly
/// before the whole series is rescaled to majorant norm `amplitude` at `w`.
pub fn random_perturbation(dims: Dims, k_max: u32, deg_max: u32, amplitude: f64, w: NormWeights, seed: u64) -> FtSeries {
    if amplitude == 0.0 {
        return FtSeries::zero(dims);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ks = vec![vec![0i32; dims.n]];
    ks.extend(l1_ball(dims.n, k_max).into_iter().filter(|k| is_canonical_half(k)));
    let cells = degree_cells(dims.n + dims.normal(), deg_max);
    let mut terms = Vec::new();
    for k in &ks {
        let zero = k.iter().all(|&v| v == 0);
        let kn: u32 = k.iter().map(|v| v.unsigned_abs()).sum();
        for e in &cells {
            let deg: u32 = e.iter().sum();
            if zero && deg <= 1 {
                continue;
            }
            let re: f64 = rng.random_range(-1.0..1.0);
            let im: f64 = if zero { 0.0 } else { rng.random_range(-1.0..1.0) };
            let size = (-(kn as f64) * w.r).exp() * w.s.powi(-(deg as i32));
            let c = Complex64::new(re, im) * size;
            let idx = MultiIndex::new(k.clone(), e[..dims.n].to_vec(), e[dims.n..].to_vec());
            if !zero {
                let neg = MultiIndex::new(k.iter().map(|v| -v).collect(), idx.l.clone(), idx.p.clone());
                terms.push((neg, c.conj()));
            }
            terms.push((idx, c));
        }
    }
    let s = FtSeries::from_terms(dims, terms, true).expect("indices within range");
    let norm = s.majorant_norm(w);
    if !(norm > 0.0 && norm.is_finite()) {
        return FtSeries::zero(dims);
    }
    s.scale(Complex64::new(amplitude / norm, 0.0))
}

/// Exponent vectors in `nvars` variables of total degree at most `deg`.
fn degree_cells(nvars: usize, deg: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; nvars];
    fn rec(i: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for v in 0..=left {
            cur[i] = v;
            rec(i + 1, left - v, cur, out);
        }
        cur[i] = 0;
    }
    rec(0, deg, &mut cur, &mut out);
    out
}

/// One line of a condition report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionResult {
    pub name: &'static str,
    pub pass: bool,
    pub required: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    pub scenario: String,
    pub conditions: Vec<ConditionResult>,
    /// Quantities re-derived from the checkers, comparable to [`Expectations`].
    pub derived: Expectations,
    /// `min |W_j|` over the sample points.
    pub c_min: f64,
    pub minor_indices: Vec<usize>,
    pub sigma: Option<f64>,
    pub k_sigma: Option<f64>,
}

impl ConditionReport {
    pub fn all_required_pass(&self) -> bool {
        self.conditions.iter().filter(|c| c.required).all(|c| c.pass)
    }

    /// `None` when the scenario states no expectations.
    pub fn matches(&self, expect: Option<&Expectations>) -> Option<bool> {
        expect.map(|e| *e == self.derived)
    }
}

/// Re-derives the condition outcomes on a coarse sample of the chart.
pub fn check_conditions(sc: &Scenario, sample: &[usize]) -> Result<ConditionReport, ModelError> {
    let n = sc.dims.n;
    let pts = sc.chart.grid_points_with(sample);
    let widths: f64 = sc.chart.domain.iter().map(|b| b[1] - b[0]).fold(f64::INFINITY, f64::min);
    let h = 1e-3 * widths;
    let mut conditions = Vec::new();

    // A0: det N_uu != 0 and no u-linear or y-u terms, at every sample
    let mut a0_fail = None;
    let mut nfs = Vec::new();
    for l in &pts {
        match pullback_normal_form(&sc.n_full, &sc.chart, l, &sc.kam) {
            Ok((nf, _, _)) => nfs.push(nf),
            Err(e) => {
                a0_fail = Some(e.to_string());
                break;
            }
        }
    }
    conditions.push(ConditionResult {
        name: "A0",
        pass: a0_fail.is_none(),
        required: true,
        detail: a0_fail.clone().unwrap_or_else(|| format!("det N_uu nonzero at {} sample points", pts.len())),
    });
    if a0_fail.is_some() {
        return Err(ModelError::Invalid(format!("A0 fails: {}", a0_fail.unwrap())));
    }

    // A1': rank of the frequency derivatives
    let mut min_rank = usize::MAX;
    let mut min_sv = f64::INFINITY;
    for l in &pts {
        let rep = check_a1_rank(&sc.n_full, &sc.chart, l, (n - 1) as u32, h)?;
        min_rank = min_rank.min(rep.rank);
        min_sv = min_sv.min(rep.singular_values.get(n - 1).copied().unwrap_or(0.0));
    }
    let a1_prime = min_rank == n;
    conditions.push(ConditionResult {
        name: "A1'",
        pass: a1_prime,
        required: true,
        detail: format!("min rank {min_rank} of {n}, smallest n-th singular value {min_sv:e}"),
    });

    // A3: rank of A and a fixed nonsingular principal minor
    let ranks: Vec<usize> = nfs.iter().map(|nf| linalg::numerical_rank(&nf.a, crate::model::RANK_TOL)).collect();
    let rank_a = ranks.iter().copied().min().unwrap_or(0);
    let constant_rank = ranks.iter().all(|&r| r == rank_a);
    let minor = nfs.first().map(|nf| nf.minor_indices.clone()).unwrap_or_default();
    let minor_ok = nfs.iter().all(|nf| {
        minor.is_empty() || {
            let sub = linalg::principal_minor(&nf.a, &minor);
            sub.determinant().abs() > 1e-12 * sub.amax().max(1.0).powi(minor.len() as i32)
        }
    });
    conditions.push(ConditionResult {
        name: "A3",
        pass: constant_rank && minor_ok && rank_a > 0,
        required: true,
        detail: format!("rank A = {rank_a} (constant: {constant_rank}), minor {minor:?} nonsingular: {minor_ok}"),
    });

    // A1'': bordered determinant on the minor
    let dbl: Vec<(bool, f64)> = nfs.iter().map(check_a1_doubleprime).collect();
    let dbl_ok = dbl.iter().all(|d| d.0);
    let dbl_min = dbl.iter().map(|d| d.1.abs()).fold(f64::INFINITY, f64::min);
    conditions.push(ConditionResult {
        name: "A1''",
        pass: dbl_ok,
        required: false,
        detail: format!("min |bordered det| {dbl_min:e}"),
    });

    // A2': no Melnikov divisor vanishes identically on the chart
    let (sigma, k_sigma) = if a1_prime {
        match estimate_sigma_and_k(&sc.n_full, &sc.chart, sample, h) {
            Ok(sk) if sk.sigma > 0.0 && sk.k.is_finite() => (Some(sk.sigma), Some(sk.k)),
            _ => (None, None),
        }
    } else {
        (None, None)
    };
    let k_check = k_sigma.map(|k| (k.ceil() as u32).clamp(1, 16)).unwrap_or(10);
    let nv = check_divisors_nonvanishing(&sc.n_full, &sc.chart, k_check, sample)?;
    conditions.push(ConditionResult {
        name: "A2'",
        pass: nv.ok,
        required: true,
        detail: if nv.ok {
            format!("no divisor with |k| <= {k_check} vanishes on all samples")
        } else {
            format!("{} divisors vanish identically, first {:?}", nv.identically_zero.len(), nv.identically_zero[0])
        },
    });

    // normal spectrum
    let mut classes = Vec::new();
    let mut c_min = f64::INFINITY;
    for l in &pts {
        let m = normal_hessian_map(&sc.n_full, &sc.chart, l)?;
        let sp = crate::model::eigenvalues_of_jm(&m)?;
        classes.push(sp.classify(1e-10));
        c_min = c_min.min(sp.min_abs());
    }
    let spectrum = classes.first().copied().unwrap_or(SpectrumClass::Mixed);
    let uniform = classes.iter().all(|&c| c == spectrum);
    conditions.push(ConditionResult {
        name: "spectrum",
        pass: uniform && c_min > 0.0,
        required: true,
        detail: format!("{spectrum:?} at every sample: {uniform}; min |W| = {c_min:e}"),
    });

    Ok(ConditionReport {
        scenario: sc.name.clone(),
        conditions,
        derived: Expectations { a1_prime, a_singular: rank_a < n, rank_a, spectrum },
        c_min,
        minor_indices: minor,
        sigma,
        k_sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_spectra() {
        let sc = ex41(1.0, 1.0, ChartKind::Line);
        let (nf, rem, _) = pullback_normal_form(&sc.n_full, &sc.chart, &[1.5], &sc.kam).unwrap();
        assert!(rem.is_empty());
        assert_eq!(nf.omega, vec![1.0, 1.5]);
        let sp = nf.spectrum().unwrap();
        let r2 = 2f64.sqrt();
        assert!(linalg::multiset_distance(&sp.omega, &[Complex64::new(0.0, r2), Complex64::new(0.0, -r2)]) < 1e-12);
        let sc = ex43(1.0).unwrap();
        let (nf, _, _) = pullback_normal_form(&sc.n_full, &sc.chart, &[1.2, 1.7], &sc.kam).unwrap();
        let r3 = 3f64.sqrt();
        let expect = [1.0, -1.0, r3, -r3].map(|v| Complex64::new(v, 0.0));
        assert!(linalg::multiset_distance(&nf.spectrum().unwrap().omega, &expect) < 1e-12);
        assert_eq!(nf.minor_indices, vec![0, 1, 2]);
        assert!(ex43(0.0).is_err());
    }

    #[test]
    fn ex42_parabola_pullback() {
        let sc = ex42(0.7, 1.3, ChartKind::Parabola);
        let l = 1.4f64;
        let (nf, rem, _) = pullback_normal_form(&sc.n_full, &sc.chart, &[l], &sc.kam).unwrap();
        let y2 = 1.3 * l * l;
        assert!((nf.omega[0] - 0.7 * l).abs() < 1e-14);
        assert!((nf.omega[1] - y2 * y2).abs() < 1e-12);
        assert!((nf.a[(1, 1)] - 2.0 * y2).abs() < 1e-12);
        // the cubic remainder eta^3/3
        assert_eq!(rem.len(), 1);
    }

    #[test]
    fn perturbation_norm_and_determinism() {
        let d = Dims::new(2, 1).unwrap();
        let w = NormWeights::new(0.5, 1e-3).unwrap();
        let p = random_perturbation(d, 3, 2, 1e-6, w, 7);
        assert!((p.majorant_norm(w) - 1e-6).abs() <= 1e-12 * 1e-6);
        assert!(p.is_real() && p.conjugate_asymmetry() == 0.0);
        assert_eq!(p.to_text(), random_perturbation(d, 3, 2, 1e-6, w, 7).to_text());
        assert_ne!(p.to_text(), random_perturbation(d, 3, 2, 1e-6, w, 8).to_text());
        assert!(random_perturbation(d, 3, 2, 0.0, w, 7).is_empty());
        assert!(p.terms().iter().all(|(i, _)| i.k.iter().any(|&v| v != 0) || i.degree() >= 2));
    }

    #[test]
    fn toml_roundtrip_and_errors() {
        let sc = ex42(1.0, 2.0, ChartKind::Line);
        let back = Scenario::from_toml(&sc.to_toml()).unwrap();
        assert_eq!(back.n_full, sc.n_full);
        assert_eq!(back.chart.eval(&[1.5]), sc.chart.eval(&[1.5]));
        let text = sc.to_toml().replace("hamiltonian =", "hamiltonain =");
        let err = Scenario::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("hamiltonian"), "{err}");
        assert!(builtin("ex41-line,a2=0").unwrap().expect.unwrap().a1_prime == false);
        assert!(builtin("nope").is_err());
    }
}
