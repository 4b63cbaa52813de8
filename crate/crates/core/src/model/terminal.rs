use std::fmt;
use std::sync::Arc;

type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Terminal payoff `f` with its declared sup-norm and Lipschitz constant.
///
/// `sup_norm == None` marks an unbounded function (e.g. `x²`), which the
/// DP and PDE solvers accept but Monte Carlo bounds and mollification do not.
#[derive(Clone)]
pub struct TerminalFunction {
    label: String,
    eval: Evaluator,
    sup_norm: Option<f64>,
    lipschitz: Option<f64>,
}

impl fmt::Debug for TerminalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TerminalFunction")
            .field("label", &self.label)
            .field("sup_norm", &self.sup_norm)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl TerminalFunction {
    pub fn custom(
        label: impl Into<String>,
        sup_norm: Option<f64>,
        lipschitz: Option<f64>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { label: label.into(), eval: Arc::new(eval), sup_norm, lipschitz }
    }

    pub fn cos() -> Self {
        Self::custom("cos", Some(1.0), Some(1.0), f64::cos)
    }

    /// `exp(-x²)`.
    pub fn gaussian_bump() -> Self {
        Self::custom("gaussian_bump", Some(1.0), Some((2.0 / std::f64::consts::E).sqrt()), |x| (-x * x).exp())
    }

    /// `clamp(x, -1, 1)`.
    pub fn clipped_ramp() -> Self {
        Self::custom("clipped_ramp", Some(1.0), Some(1.0), |x| x.clamp(-1.0, 1.0))
    }

    pub fn constant(c: f64) -> Self {
        Self::custom(format!("constant({c})"), Some(c.abs()), Some(0.0), move |_| c)
    }

    /// `x²`; unbounded.
    pub fn square() -> Self {
        Self::custom("square", None, None, |x| x * x)
    }

    /// `c · f`.
    pub fn scaled(&self, c: f64) -> Self {
        let inner = self.eval.clone();
        Self {
            label: format!("{c}*{}", self.label),
            eval: Arc::new(move |x| c * inner(x)),
            sup_norm: self.sup_norm.map(|s| s * c.abs()),
            lipschitz: self.lipschitz.map(|l| l * c.abs()),
        }
    }

    /// `f + g`.
    pub fn sum(&self, other: &TerminalFunction) -> Self {
        let (a, b) = (self.eval.clone(), other.eval.clone());
        Self {
            label: format!("{}+{}", self.label, other.label),
            eval: Arc::new(move |x| a(x) + b(x)),
            sup_norm: self.sup_norm.zip(other.sup_norm).map(|(p, q)| p + q),
            lipschitz: self.lipschitz.zip(other.lipschitz).map(|(p, q)| p + q),
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn sup_norm(&self) -> Option<f64> {
        self.sup_norm
    }

    pub fn is_bounded(&self) -> bool {
        self.sup_norm.is_some()
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }
}
