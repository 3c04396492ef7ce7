//! Pre-processing function families φ_α: R^d -> R behind a common trait.
//!
//! Every encoding strategy is an interchangeable object registered by name;
//! configs and the CLI select one at runtime through [`EncodingSpec`]. The
//! feature map built from an encoding is the tensor product over sites of
//! (1, cos φ_α(x), sin φ_α(x)).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Serializable descriptor; the registry turns it into a live strategy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncodingSpec {
    /// φ_α(x) = x on 1-D input.
    Naive { n: usize },
    /// φ_α(x) = base^(α-1) x on 1-D input.
    Exponential { n: usize, base: f64 },
    /// φ_α(x) = x_α.
    ElementWise { n: usize },
    /// First half φ_α(x) = x, second half φ_α(x) = (π - x)^2 on 1-D input.
    Iqp1d { n: usize },
    /// Compiled nearest-neighbor IQP encoding on d-dimensional input with
    /// `reps` repetitions; n = reps * d^2 sites with zero padding.
    IqpVec { d: usize, reps: usize },
    /// Explicit per-site function list, including zero sites.
    ZeroPadded { sites: Vec<SiteFn> },
}

/// One pre-processing function on a single site.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fn", rename_all = "snake_case")]
pub enum SiteFn {
    Zero,
    /// factor * x_var
    Scaled { var: usize, factor: f64 },
    /// x_a * x_b
    PairProduct { a: usize, b: usize },
    /// (π - x_var)^2
    ShiftedSquare { var: usize },
}

impl SiteFn {
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            SiteFn::Zero => 0.0,
            SiteFn::Scaled { var, factor } => factor * x[*var],
            SiteFn::PairProduct { a, b } => x[*a] * x[*b],
            SiteFn::ShiftedSquare { var } => {
                let d = std::f64::consts::PI - x[*var];
                d * d
            }
        }
    }

    fn input_dim(&self) -> usize {
        match self {
            SiteFn::Zero => 0,
            SiteFn::Scaled { var, .. } => var + 1,
            SiteFn::PairProduct { a, b } => (*a).max(*b) + 1,
            SiteFn::ShiftedSquare { var } => var + 1,
        }
    }
}

/// A family of pre-processing functions; deterministic and total on R^d.
pub trait Encoding: Send + Sync {
    /// Number of compiled Pauli-Z rotations (chain length N).
    fn n_sites(&self) -> usize;
    /// Input dimension d.
    fn input_dim(&self) -> usize;
    /// φ_α(x) for 0-based site α.
    fn phi(&self, alpha: usize, x: &[f64]) -> f64;
    /// Registered strategy name.
    fn name(&self) -> &'static str;
    /// Descriptor that rebuilds this strategy.
    fn spec(&self) -> EncodingSpec;
    /// Integer per-site frequencies for 1-D encodings φ_α(x) = k_α x, when
    /// every site is of that form. Enables the analytic Gram path.
    fn integer_frequencies(&self) -> Option<Vec<i64>> {
        None
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Incompatible(format!(
                "encoding '{}' expects input dimension {}, got {}",
                self.name(),
                self.input_dim(),
                x.len()
            )));
        }
        Ok(())
    }

    /// All φ_α(x) at once.
    fn phis(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_sites()).map(|a| self.phi(a, x)).collect()
    }
}

struct NaiveEnc {
    n: usize,
}

impl Encoding for NaiveEnc {
    fn n_sites(&self) -> usize {
        self.n
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn phi(&self, _alpha: usize, x: &[f64]) -> f64 {
        x[0]
    }
    fn name(&self) -> &'static str {
        "naive"
    }
    fn spec(&self) -> EncodingSpec {
        EncodingSpec::Naive { n: self.n }
    }
    fn integer_frequencies(&self) -> Option<Vec<i64>> {
        Some(vec![1; self.n])
    }
}

struct ExponentialEnc {
    n: usize,
    base: f64,
}

impl Encoding for ExponentialEnc {
    fn n_sites(&self) -> usize {
        self.n
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn phi(&self, alpha: usize, x: &[f64]) -> f64 {
        self.base.powi(alpha as i32) * x[0]
    }
    fn name(&self) -> &'static str {
        "exponential"
    }
    fn spec(&self) -> EncodingSpec {
        EncodingSpec::Exponential {
            n: self.n,
            base: self.base,
        }
    }
    fn integer_frequencies(&self) -> Option<Vec<i64>> {
        if self.base.fract() == 0.0 && self.base.abs() < 1e9 {
            Some(
                (0..self.n)
                    .map(|a| (self.base as i64).pow(a as u32))
                    .collect(),
            )
        } else {
            None
        }
    }
}

struct ElementWiseEnc {
    n: usize,
}

impl Encoding for ElementWiseEnc {
    fn n_sites(&self) -> usize {
        self.n
    }
    fn input_dim(&self) -> usize {
        self.n
    }
    fn phi(&self, alpha: usize, x: &[f64]) -> f64 {
        x[alpha]
    }
    fn name(&self) -> &'static str {
        "element_wise"
    }
    fn spec(&self) -> EncodingSpec {
        EncodingSpec::ElementWise { n: self.n }
    }
}

struct Iqp1dEnc {
    n: usize,
}

impl Encoding for Iqp1dEnc {
    fn n_sites(&self) -> usize {
        self.n
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn phi(&self, alpha: usize, x: &[f64]) -> f64 {
        if alpha < self.n / 2 {
            x[0]
        } else {
            let d = std::f64::consts::PI - x[0];
            d * d
        }
    }
    fn name(&self) -> &'static str {
        "iqp1d"
    }
    fn spec(&self) -> EncodingSpec {
        EncodingSpec::Iqp1d { n: self.n }
    }
}

/// Compiled nearest-neighbor IQP chain: per repetition, one parallel layer of
/// single-variable phases x_i followed by d-1 blocks holding one pair phase
/// x_i x_{i+1} each (remaining sites in those blocks are zero functions).
struct IqpVecEnc {
    d: usize,
    reps: usize,
    sites: Vec<SiteFn>,
}

impl IqpVecEnc {
    fn build(d: usize, reps: usize) -> Self {
        let mut sites = Vec::with_capacity(reps * d * d);
        for _ in 0..reps {
            for q in 0..d {
                sites.push(SiteFn::Scaled {
                    var: q,
                    factor: 1.0,
                });
            }
            for j in 0..d.saturating_sub(1) {
                for q in 0..d {
                    if q == j + 1 {
                        sites.push(SiteFn::PairProduct { a: j, b: j + 1 });
                    } else {
                        sites.push(SiteFn::Zero);
                    }
                }
            }
        }
        Self { d, reps, sites }
    }

    /// The non-trivial functions in chain order, ignoring zero sites.
    pub fn nontrivial(&self) -> Vec<&SiteFn> {
        self.sites.iter().filter(|s| !matches!(s, SiteFn::Zero)).collect()
    }
}

impl Encoding for IqpVecEnc {
    fn n_sites(&self) -> usize {
        self.sites.len()
    }
    fn input_dim(&self) -> usize {
        self.d
    }
    fn phi(&self, alpha: usize, x: &[f64]) -> f64 {
        self.sites[alpha].eval(x)
    }
    fn name(&self) -> &'static str {
        "iqp_vec"
    }
    fn spec(&self) -> EncodingSpec {
        EncodingSpec::IqpVec {
            d: self.d,
            reps: self.reps,
        }
    }
}

struct ZeroPaddedEnc {
    sites: Vec<SiteFn>,
    dim: usize,
}

impl Encoding for ZeroPaddedEnc {
    fn n_sites(&self) -> usize {
        self.sites.len()
    }
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn phi(&self, alpha: usize, x: &[f64]) -> f64 {
        self.sites[alpha].eval(x)
    }
    fn name(&self) -> &'static str {
        "zero_padded"
    }
    fn spec(&self) -> EncodingSpec {
        EncodingSpec::ZeroPadded {
            sites: self.sites.clone(),
        }
    }
    fn integer_frequencies(&self) -> Option<Vec<i64>> {
        let mut freqs = Vec::with_capacity(self.sites.len());
        for site in &self.sites {
            match site {
                SiteFn::Zero => freqs.push(0),
                SiteFn::Scaled { var: 0, factor } if factor.fract() == 0.0 => {
                    freqs.push(*factor as i64)
                }
                _ => return None,
            }
        }
        if self.dim <= 1 {
            Some(freqs)
        } else {
            None
        }
    }
}

/// Builds the strategy named by a descriptor.
pub fn build_encoding(spec: &EncodingSpec) -> Result<Box<dyn Encoding>> {
    match spec {
        EncodingSpec::Naive { n } => {
            require_positive(*n)?;
            Ok(Box::new(NaiveEnc { n: *n }))
        }
        EncodingSpec::Exponential { n, base } => {
            require_positive(*n)?;
            Ok(Box::new(ExponentialEnc { n: *n, base: *base }))
        }
        EncodingSpec::ElementWise { n } => {
            require_positive(*n)?;
            Ok(Box::new(ElementWiseEnc { n: *n }))
        }
        EncodingSpec::Iqp1d { n } => {
            require_positive(*n)?;
            if n % 2 != 0 {
                return Err(Error::InvalidArgument(
                    "iqp1d encoding needs an even number of sites".into(),
                ));
            }
            Ok(Box::new(Iqp1dEnc { n: *n }))
        }
        EncodingSpec::IqpVec { d, reps } => {
            require_positive(*d)?;
            require_positive(*reps)?;
            Ok(Box::new(IqpVecEnc::build(*d, *reps)))
        }
        EncodingSpec::ZeroPadded { sites } => {
            if sites.is_empty() {
                return Err(Error::InvalidArgument("zero_padded: empty site list".into()));
            }
            let dim = sites.iter().map(|s| s.input_dim()).max().unwrap_or(1).max(1);
            Ok(Box::new(ZeroPaddedEnc {
                sites: sites.clone(),
                dim,
            }))
        }
    }
}

/// Registered strategy names, for CLI help and config validation.
pub fn registered_encodings() -> &'static [&'static str] {
    &[
        "naive",
        "exponential",
        "element_wise",
        "iqp1d",
        "iqp_vec",
        "zero_padded",
    ]
}

/// Builds an encoding from a registry name plus loose JSON parameters, the
/// CLI entry point.
pub fn build_encoding_by_name(name: &str, params: &serde_json::Value) -> Result<Box<dyn Encoding>> {
    let mut obj = match params {
        serde_json::Value::Null => serde_json::Map::new(),
        serde_json::Value::Object(m) => m.clone(),
        _ => {
            return Err(Error::Parse(
                "encoding parameters must be a JSON object".into(),
            ))
        }
    };
    obj.insert(
        "kind".to_string(),
        serde_json::Value::String(name.to_string()),
    );
    let spec: EncodingSpec = serde_json::from_value(serde_json::Value::Object(obj))?;
    build_encoding(&spec)
}

fn require_positive(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidArgument("encoding size must be >= 1".into()))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn naive_is_constant_in_alpha() {
        let enc = build_encoding(&EncodingSpec::Naive { n: 4 }).unwrap();
        for a in 0..4 {
            assert_abs_diff_eq!(enc.phi(a, &[0.3]), 0.3);
        }
        assert_eq!(enc.integer_frequencies(), Some(vec![1, 1, 1, 1]));
    }

    #[test]
    fn exponential_frequencies() {
        let enc = build_encoding(&EncodingSpec::Exponential { n: 3, base: 3.0 }).unwrap();
        assert_abs_diff_eq!(enc.phi(2, &[2.0]), 18.0);
        assert_eq!(enc.integer_frequencies(), Some(vec![1, 3, 9]));
    }

    #[test]
    fn iqp1d_halves() {
        let enc = build_encoding(&EncodingSpec::Iqp1d { n: 4 }).unwrap();
        let x = [0.5];
        assert_abs_diff_eq!(enc.phi(0, &x), 0.5);
        assert_abs_diff_eq!(enc.phi(1, &x), 0.5);
        let d = std::f64::consts::PI - 0.5;
        assert_abs_diff_eq!(enc.phi(2, &x), d * d);
        assert_abs_diff_eq!(enc.phi(3, &x), d * d);
    }

    #[test]
    fn iqp_vec_layout() {
        let d = 3;
        let enc = build_encoding(&EncodingSpec::IqpVec { d, reps: 2 }).unwrap();
        assert_eq!(enc.n_sites(), 2 * d * d);
        let x = [1.0, 2.0, 3.0];
        // first block: x1, x2, x3
        assert_abs_diff_eq!(enc.phi(0, &x), 1.0);
        assert_abs_diff_eq!(enc.phi(1, &x), 2.0);
        assert_abs_diff_eq!(enc.phi(2, &x), 3.0);
        // second block: pair (x1 x2) on qubit 2, zeros elsewhere
        assert_abs_diff_eq!(enc.phi(3, &x), 0.0);
        assert_abs_diff_eq!(enc.phi(4, &x), 2.0);
        assert_abs_diff_eq!(enc.phi(5, &x), 0.0);
        // third block: pair (x2 x3) on qubit 3
        assert_abs_diff_eq!(enc.phi(8, &x), 6.0);
        // count nontrivial functions: reps * (2d - 1)
        let nontrivial = (0..enc.n_sites())
            .filter(|&a| {
                let probe = enc.phi(a, &[0.9, 1.1, 1.3]);
                probe != 0.0
            })
            .count();
        assert_eq!(nontrivial, 2 * (2 * d - 1));
    }

    #[test]
    fn spec_roundtrip_json() {
        let spec = EncodingSpec::IqpVec { d: 4, reps: 2 };
        let json = serde_json::to_string(&spec).unwrap();
        let back: EncodingSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);
    }

    #[test]
    fn registry_by_name() {
        let enc = build_encoding_by_name(
            "exponential",
            &serde_json::json!({"n": 2, "base": 3.0}),
        )
        .unwrap();
        assert_eq!(enc.name(), "exponential");
        assert!(build_encoding_by_name("no_such", &serde_json::Value::Null).is_err());
    }
}
