//! The data-fit plus boundary-smoothness part of the reconstruction
//! objective, as a function of the coefficient tensor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patch::{boundary_diff_operator, PatchGeometry, PermutationMap};
use crate::sparse::SparseSystemMatrix;
use crate::tensor::{ttranspose, FourierTensor3, Tensor3};

/// How the boundary term is weighted against the data term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryScaling {
    /// `½‖(δ/c)·Lz‖²` with `c = √(2·den)`, the stacked least-squares form.
    #[default]
    Stacked,
    /// `δ²ψ(z) = δ²‖Lz‖² / (2·den)`, twice the stacked weight.
    Penalty,
}

/// Fixed data of a reconstruction: tomography operator, measurements,
/// dictionary and patch layout.
#[derive(Debug, Clone)]
pub struct ReconProblem {
    a: SparseSystemMatrix,
    b: Vec<f64>,
    dictionary: Tensor3,
    d_hat: FourierTensor3,
    d_hat_t: FourierTensor3,
    geom: PatchGeometry,
    perm: PermutationMap,
    l_op: SparseSystemMatrix,
    c_const: f64,
}

impl ReconProblem {
    pub fn new(
        a: SparseSystemMatrix,
        b: Vec<f64>,
        dictionary: Tensor3,
        geom: PatchGeometry,
    ) -> Result<Self> {
        let (p, _, r) = dictionary.dims();
        if (p, r) != (geom.p(), geom.r()) {
            return Err(Error::invalid(format!(
                "dictionary patches are {p}x{r}, geometry uses {}x{}",
                geom.p(),
                geom.r()
            )));
        }
        if a.ncols() != geom.num_pixels() {
            return Err(Error::invalid(format!(
                "system matrix has {} columns for a {}-pixel image",
                a.ncols(),
                geom.num_pixels()
            )));
        }
        if b.len() != a.nrows() {
            return Err(Error::invalid(format!(
                "{} measurements for a system matrix with {} rows",
                b.len(),
                a.nrows()
            )));
        }
        if a.nrows() == 0 {
            return Err(Error::invalid("the system matrix has no rows"));
        }
        let d_hat = FourierTensor3::forward(&dictionary);
        let d_hat_t = FourierTensor3::forward(&ttranspose(&dictionary));
        Ok(ReconProblem {
            c_const: (2.0 * geom.boundary_denominator() as f64).sqrt(),
            perm: PermutationMap::new(&geom),
            l_op: boundary_diff_operator(&geom),
            a,
            b,
            dictionary,
            d_hat,
            d_hat_t,
            geom,
        })
    }

    pub fn system_matrix(&self) -> &SparseSystemMatrix {
        &self.a
    }

    pub fn measurements(&self) -> &[f64] {
        &self.b
    }

    pub fn dictionary(&self) -> &Tensor3 {
        &self.dictionary
    }

    pub fn geometry(&self) -> &PatchGeometry {
        &self.geom
    }

    pub fn permutation(&self) -> &PermutationMap {
        &self.perm
    }

    pub fn boundary_operator(&self) -> &SparseSystemMatrix {
        &self.l_op
    }

    /// `c = √(2(M(M/p − 1) + N(N/r − 1)))`.
    pub fn c_const(&self) -> f64 {
        self.c_const
    }

    /// Number of measurements `m`.
    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    /// Shape `s × q × r` of the coefficient tensor.
    pub fn coeff_dims(&self) -> (usize, usize, usize) {
        (self.dictionary.dims().1, self.geom.q(), self.geom.r())
    }

    /// Image-order pixel vector `Π vec(D*C)`.
    pub fn image_vector(&self, c: &Tensor3) -> Result<Vec<f64>> {
        self.check_coeffs(c)?;
        let patches = self.d_hat.mul(&FourierTensor3::forward(c))?.inverse()?;
        self.perm.apply(patches.as_slice())
    }

    /// Adjoint of [`image_vector`](Self::image_vector): `Dᵀ * reshape(Πᵀ g)`.
    pub fn image_vector_adjoint(&self, g: &[f64]) -> Result<Tensor3> {
        let (p, q, r) = (self.geom.p(), self.geom.q(), self.geom.r());
        let patches = Tensor3::from_vec(p, q, r, self.perm.apply_adjoint(g)?)?;
        self.d_hat_t
            .mul(&FourierTensor3::forward(&patches))?
            .inverse()
    }

    /// The smooth objective for boundary weight `delta`.
    pub fn smooth(&self, delta: f64, scaling: BoundaryScaling) -> SmoothObjective<'_> {
        let den = self.geom.boundary_denominator() as f64;
        let boundary_weight = if den == 0.0 {
            0.0
        } else {
            match scaling {
                BoundaryScaling::Stacked => delta / self.c_const,
                BoundaryScaling::Penalty => delta / den.sqrt(),
            }
        };
        SmoothObjective {
            problem: self,
            data_weight: 1.0 / (self.m() as f64).sqrt(),
            boundary_weight,
        }
    }

    fn check_coeffs(&self, c: &Tensor3) -> Result<()> {
        if c.dims() != self.coeff_dims() {
            return Err(Error::invalid(format!(
                "coefficient tensor has dims {:?}, expected {:?}",
                c.dims(),
                self.coeff_dims()
            )));
        }
        Ok(())
    }
}

/// Residual pair of the smooth objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    /// `(A z − b)/√m`
    pub data: Vec<f64>,
    /// boundary weight times `L z`
    pub boundary: Vec<f64>,
}

impl Residuals {
    /// `½(‖data‖² + ‖boundary‖²)`.
    pub fn value(&self) -> f64 {
        0.5 * (sq_norm(&self.data) + sq_norm(&self.boundary))
    }
}

/// `f(C) = ½‖(AΠvec(D*C) − b)/√m‖² + ½‖w·LΠvec(D*C)‖²`.
#[derive(Debug, Clone, Copy)]
pub struct SmoothObjective<'a> {
    problem: &'a ReconProblem,
    data_weight: f64,
    boundary_weight: f64,
}

impl SmoothObjective<'_> {
    pub fn data_weight(&self) -> f64 {
        self.data_weight
    }

    pub fn boundary_weight(&self) -> f64 {
        self.boundary_weight
    }

    pub fn forward_map(&self, c: &Tensor3) -> Result<Residuals> {
        let mut res = self.linear_map(c)?;
        res.data
            .iter_mut()
            .zip(&self.problem.b)
            .for_each(|(d, b)| *d -= self.data_weight * b);
        Ok(res)
    }

    /// The linear part of [`forward_map`](Self::forward_map) (no `b`).
    pub fn linear_map(&self, c: &Tensor3) -> Result<Residuals> {
        let z = self.problem.image_vector(c)?;
        let mut data = self.problem.a.matvec(&z)?;
        data.iter_mut().for_each(|v| *v *= self.data_weight);
        let boundary = if self.boundary_weight == 0.0 {
            vec![0.0; self.problem.l_op.nrows()]
        } else {
            let mut lz = self.problem.l_op.matvec(&z)?;
            lz.iter_mut().for_each(|v| *v *= self.boundary_weight);
            lz
        };
        Ok(Residuals { data, boundary })
    }

    /// Adjoint of [`linear_map`](Self::linear_map).
    pub fn adjoint(&self, res: &Residuals) -> Result<Tensor3> {
        let mut g = self.problem.a.matvec_transpose(&res.data)?;
        g.iter_mut().for_each(|v| *v *= self.data_weight);
        if self.boundary_weight != 0.0 {
            let lt = self.problem.l_op.matvec_transpose(&res.boundary)?;
            g.iter_mut()
                .zip(lt)
                .for_each(|(v, w)| *v += self.boundary_weight * w);
        }
        self.problem.image_vector_adjoint(&g)
    }

    pub fn value(&self, c: &Tensor3) -> Result<f64> {
        Ok(self.forward_map(c)?.value())
    }

    pub fn gradient(&self, c: &Tensor3) -> Result<Tensor3> {
        self.adjoint(&self.forward_map(c)?)
    }

    /// Value and gradient from one forward evaluation.
    pub fn value_and_gradient(&self, c: &Tensor3) -> Result<(f64, Tensor3)> {
        let res = self.forward_map(c)?;
        Ok((res.value(), self.adjoint(&res)?))
    }

    /// Power-method estimate of `‖K‖²` for the linear map `K`, the Lipschitz
    /// constant of the gradient. Deterministic start vector.
    pub fn lipschitz_estimate(&self, iterations: usize) -> Result<f64> {
        let (s, q, r) = self.problem.coeff_dims();
        let mut v = Tensor3::from_fn(s, q, r, |i, j, k| {
            1.0 + ((i * 7 + j * 13 + k * 29) % 17) as f64 / 17.0
        });
        let mut estimate = 0.0;
        for _ in 0..iterations.max(1) {
            let norm = v.fro_norm();
            if norm == 0.0 {
                return Ok(0.0);
            }
            v = v.scale(1.0 / norm);
            let w = self.adjoint(&self.linear_map(&v)?)?;
            estimate = v.dot(&w);
            v = w;
        }
        Ok(estimate)
    }
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}
