//! Smooth maps `φ: ℝ^k → ℝ^{shape}` with Jacobians and optional Hessians.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Scalar profile `g` of a ridge field `φ(y)_p = g((M y)_p + b_p)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Profile {
    Identity,
    Sine,
    /// `c0 + c1 u + c2 u² + c3 u³`.
    Cubic([f64; 4]),
}

impl Profile {
    fn value(&self, u: f64) -> f64 {
        match *self {
            Profile::Identity => u,
            Profile::Sine => u.sin(),
            Profile::Cubic([c0, c1, c2, c3]) => c0 + u * (c1 + u * (c2 + u * c3)),
        }
    }

    fn d1(&self, u: f64) -> f64 {
        match *self {
            Profile::Identity => 1.0,
            Profile::Sine => u.cos(),
            Profile::Cubic([_, c1, c2, c3]) => c1 + u * (2.0 * c2 + 3.0 * c3 * u),
        }
    }

    fn d2(&self, u: f64) -> f64 {
        match *self {
            Profile::Identity => 0.0,
            Profile::Sine => -u.sin(),
            Profile::Cubic([_, _, c2, c3]) => 2.0 * c2 + 6.0 * c3 * u,
        }
    }
}

/// Caller-declared estimates of `‖φ‖_{1,δ}` and `‖φ‖_{2,δ}`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DeclaredNorms {
    pub c1: Option<f64>,
    pub c2: Option<f64>,
}

type Rule = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

#[derive(Clone)]
enum Rules {
    Ridge {
        matrix: Vec<f64>,
        offset: Vec<f64>,
        profile: Profile,
    },
    Custom {
        value: Rule,
        jacobian: Rule,
        hessian: Option<Rule>,
    },
}

/// A vector field with value, Jacobian and (optionally) Hessian rules.
///
/// Values are row-major tensors of shape `output`; the Jacobian appends one
/// axis of length `input`, the Hessian two.
#[derive(Clone)]
pub struct VectorField {
    input: usize,
    output: Vec<usize>,
    rules: Rules,
    delta: f64,
    norms: DeclaredNorms,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.rules {
            Rules::Ridge { profile, .. } => format!("{profile:?}"),
            Rules::Custom { .. } => "Custom".to_string(),
        };
        f.debug_struct("VectorField")
            .field("input", &self.input)
            .field("output", &self.output)
            .field("kind", &kind)
            .field("delta", &self.delta)
            .finish()
    }
}

fn row_sum_norm(matrix: &[f64], cols: usize) -> f64 {
    matrix
        .chunks(cols)
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

impl VectorField {
    /// `φ(y)_p = g((M y)_p + b_p)` with `M` of shape `[width(output), input]`.
    pub fn ridge(
        input: usize,
        output: Vec<usize>,
        matrix: Vec<f64>,
        offset: Vec<f64>,
        profile: Profile,
    ) -> Result<Self> {
        let width: usize = output.iter().product();
        if input == 0 || width == 0 {
            return Err(Error::Shape(format!(
                "field needs nonempty input and output, got {input} -> {output:?}"
            )));
        }
        if matrix.len() != width * input {
            return Err(Error::LengthMismatch {
                expected: width * input,
                got: matrix.len(),
            });
        }
        if offset.len() != width {
            return Err(Error::LengthMismatch {
                expected: width,
                got: offset.len(),
            });
        }
        if matrix.iter().chain(&offset).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "field coefficients must be finite".into(),
            ));
        }
        let m = row_sum_norm(&matrix, input);
        let norms = match profile {
            Profile::Sine => DeclaredNorms {
                c1: Some(1.0 + m + m * m),
                c2: Some(1.0 + m + m * m + m * m * m),
            },
            Profile::Identity if m == 0.0 => {
                let b = offset.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
                DeclaredNorms {
                    c1: Some(b),
                    c2: Some(b),
                }
            }
            _ => DeclaredNorms::default(),
        };
        Ok(Self {
            input,
            output,
            rules: Rules::Ridge {
                matrix,
                offset,
                profile,
            },
            delta: 1.0,
            norms,
        })
    }

    pub fn constant(input: usize, output: Vec<usize>, value: Vec<f64>) -> Result<Self> {
        let width: usize = output.iter().product();
        Self::ridge(
            input,
            output,
            vec![0.0; width * input],
            value,
            Profile::Identity,
        )
    }

    /// `φ(y) = M y`.
    pub fn linear(input: usize, output: Vec<usize>, matrix: Vec<f64>) -> Result<Self> {
        let width: usize = output.iter().product();
        Self::ridge(input, output, matrix, vec![0.0; width], Profile::Identity)
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = vec![0.0; dim * dim];
        for k in 0..dim {
            m[k * dim + k] = 1.0;
        }
        Self::linear(dim, vec![dim], m).expect("identity field is well formed")
    }

    /// `φ(y)_p = sin((M y)_p + b_p)`.
    pub fn sine(
        input: usize,
        output: Vec<usize>,
        matrix: Vec<f64>,
        offset: Vec<f64>,
    ) -> Result<Self> {
        Self::ridge(input, output, matrix, offset, Profile::Sine)
    }

    /// `φ(y)_p = P((M y)_p + b_p)` for a polynomial `P` of degree at most 3.
    pub fn polynomial(
        input: usize,
        output: Vec<usize>,
        matrix: Vec<f64>,
        offset: Vec<f64>,
        coeffs: [f64; 4],
    ) -> Result<Self> {
        Self::ridge(input, output, matrix, offset, Profile::Cubic(coeffs))
    }

    /// A field given by caller rules; `delta` is its declared Hölder
    /// regularity of the top derivative.
    pub fn custom(
        input: usize,
        output: Vec<usize>,
        delta: f64,
        value: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        jacobian: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        hessian: Option<Rule>,
    ) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "field regularity must lie in (0, 1], got {delta}"
            )));
        }
        if input == 0 || output.iter().product::<usize>() == 0 {
            return Err(Error::Shape(format!(
                "field needs nonempty input and output, got {input} -> {output:?}"
            )));
        }
        Ok(Self {
            input,
            output,
            rules: Rules::Custom {
                value: Arc::new(value),
                jacobian: Arc::new(jacobian),
                hessian,
            },
            delta,
            norms: DeclaredNorms::default(),
        })
    }

    pub fn with_norms(mut self, norms: DeclaredNorms) -> Self {
        self.norms = norms;
        self
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn output_shape(&self) -> &[usize] {
        &self.output
    }

    pub fn output_width(&self) -> usize {
        self.output.iter().product()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn norms(&self) -> DeclaredNorms {
        self.norms
    }

    pub fn has_hessian(&self) -> bool {
        match &self.rules {
            Rules::Ridge { .. } => true,
            Rules::Custom { hessian, .. } => hessian.is_some(),
        }
    }

    /// `true` when the Jacobian vanishes identically.
    pub fn is_constant(&self) -> bool {
        match &self.rules {
            Rules::Ridge { matrix, .. } => matrix.iter().all(|v| *v == 0.0),
            Rules::Custom { .. } => false,
        }
    }

    fn ridge_arg(matrix: &[f64], offset: &[f64], input: usize, y: &[f64], p: usize) -> f64 {
        let row = &matrix[p * input..(p + 1) * input];
        offset[p] + row.iter().zip(y).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn eval(&self, y: &[f64], out: &mut [f64]) {
        match &self.rules {
            Rules::Ridge {
                matrix,
                offset,
                profile,
            } => {
                for (p, o) in out.iter_mut().enumerate() {
                    *o = profile.value(Self::ridge_arg(matrix, offset, self.input, y, p));
                }
            }
            Rules::Custom { value, .. } => value(y, out),
        }
    }

    /// `out[p·k + q] = ∂_q φ_p(y)`.
    pub fn jacobian(&self, y: &[f64], out: &mut [f64]) {
        match &self.rules {
            Rules::Ridge {
                matrix,
                offset,
                profile,
            } => {
                let k = self.input;
                for p in 0..self.output_width() {
                    let g1 = profile.d1(Self::ridge_arg(matrix, offset, k, y, p));
                    for q in 0..k {
                        out[p * k + q] = g1 * matrix[p * k + q];
                    }
                }
            }
            Rules::Custom { jacobian, .. } => jacobian(y, out),
        }
    }

    /// `out[(p·k + q)·k + r] = ∂_q ∂_r φ_p(y)`.
    pub fn hessian(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.rules {
            Rules::Ridge {
                matrix,
                offset,
                profile,
            } => {
                let k = self.input;
                for p in 0..self.output_width() {
                    let g2 = profile.d2(Self::ridge_arg(matrix, offset, k, y, p));
                    for q in 0..k {
                        for r in 0..k {
                            out[(p * k + q) * k + r] = g2 * matrix[p * k + q] * matrix[p * k + r];
                        }
                    }
                }
                Ok(())
            }
            Rules::Custom {
                hessian: Some(h), ..
            } => {
                h(y, out);
                Ok(())
            }
            Rules::Custom { hessian: None, .. } => Err(Error::InvalidParameter(
                "this vector field has no Hessian rule".into(),
            )),
        }
    }
}
