use rayon::prelude::*;

use super::dense::{dense_spectrum, DenseSpectrum};
use super::lanczos::Krylov;
use crate::error::{Error, Result};
use crate::fock::FockOperator;
use crate::linalg::{self, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolventOptions {
    /// Relative residual target `‖(A − z)x − v‖ / ‖v‖`.
    pub tol: f64,
    pub max_iter: usize,
    /// Minimum admissible distance between a shift and the spectrum.
    pub distance_floor: f64,
    /// Dimensions up to this use an eigendecomposition.
    pub dense_limit: usize,
}

impl Default for ResolventOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 1500,
            distance_floor: 1e-10,
            dense_limit: super::DEFAULT_DENSE_LIMIT,
        }
    }
}

/// `(A − z)^{-1}` for a real symmetric `A`.
pub trait Resolvent: Sync {
    fn dim(&self) -> usize;

    /// `(A − z_k)^{-1} v` for every shift.
    fn solve_shifts(&self, shifts: &[C64], v: &[C64]) -> Result<Vec<Vec<C64>>>;

    /// `(A − z_k)^{-1} v_k` for paired shifts and vectors.
    fn solve_pairs(&self, shifts: &[C64], vs: &[Vec<C64>]) -> Result<Vec<Vec<C64>>>;

    /// Eigenvalues, when a full decomposition is available.
    fn spectrum(&self) -> Option<&DenseSpectrum> {
        None
    }
}

fn conditioning(z: C64, distance: f64) -> Error {
    Error::Conditioning {
        shift: format!("{:.6e}{:+.6e}i", z.re, z.im),
        distance,
    }
}

/// Resolvent through a full eigendecomposition.
pub struct DenseResolvent {
    spectrum: DenseSpectrum,
    floor: f64,
}

impl DenseResolvent {
    pub fn new(op: &FockOperator, limit: usize, floor: f64) -> Result<Self> {
        Ok(Self {
            spectrum: dense_spectrum(op, limit)?,
            floor,
        })
    }

    pub fn from_spectrum(spectrum: DenseSpectrum, floor: f64) -> Self {
        Self { spectrum, floor }
    }

    fn check(&self, z: C64) -> Result<()> {
        let d = self
            .spectrum
            .values()
            .iter()
            .map(|&l| (C64::new(l, 0.0) - z).norm())
            .fold(f64::INFINITY, f64::min);
        if d < self.floor {
            return Err(conditioning(z, d));
        }
        Ok(())
    }
}

impl Resolvent for DenseResolvent {
    fn dim(&self) -> usize {
        self.spectrum.dim()
    }

    fn solve_shifts(&self, shifts: &[C64], v: &[C64]) -> Result<Vec<Vec<C64>>> {
        let vs: Vec<Vec<C64>> = shifts.iter().map(|_| v.to_vec()).collect();
        self.solve_pairs(shifts, &vs)
    }

    fn solve_pairs(&self, shifts: &[C64], vs: &[Vec<C64>]) -> Result<Vec<Vec<C64>>> {
        for &z in shifts {
            self.check(z)?;
        }
        let fs: Vec<Box<dyn Fn(f64) -> C64>> = shifts
            .iter()
            .map(|&z| Box::new(move |l: f64| C64::new(1.0, 0.0) / (C64::new(l, 0.0) - z)) as Box<dyn Fn(f64) -> C64>)
            .collect();
        let frefs: Vec<&dyn Fn(f64) -> C64> = fs.iter().map(|f| f.as_ref()).collect();
        let xs: Vec<&[C64]> = vs.iter().map(|v| v.as_slice()).collect();
        Ok(self.spectrum.apply_functions(&frefs, &xs))
    }

    fn spectrum(&self) -> Option<&DenseSpectrum> {
        Some(&self.spectrum)
    }
}

/// Multi-shift Lanczos: one Krylov space of `A` serves every shift.
pub struct KrylovResolvent<'a> {
    op: &'a FockOperator,
    opts: ResolventOptions,
}

impl<'a> KrylovResolvent<'a> {
    pub fn new(op: &'a FockOperator, opts: ResolventOptions) -> Result<Self> {
        if !op.is_symmetric() {
            return Err(Error::Precondition("resolvent needs a symmetric operator".into()));
        }
        Ok(Self { op, opts })
    }

    /// Shifted solves for a real right-hand side.
    pub fn solve_real(&self, shifts: &[C64], b: &[f64]) -> Result<Vec<Vec<C64>>> {
        let n = self.op.dim();
        let bn = linalg::norm(b);
        if bn == 0.0 {
            return Ok(shifts.iter().map(|_| vec![C64::new(0.0, 0.0); n]).collect());
        }
        let mut kr = Krylov::new(self.op, b)?;
        let mut next_check = 4usize;
        loop {
            let progressed = kr.step(false);
            let k = kr.len();
            let exhausted = kr.exhausted() || !progressed || kr.last_beta() == 0.0;
            if k < next_check && !exhausted && k < self.opts.max_iter {
                continue;
            }
            next_check = k + if k < 100 { 4 } else { 10 };
            let (theta, s) = kr.ritz();
            let beta = kr.last_beta();
            // y(z) = ‖b‖ S diag(1/(θ − z)) Sᵀ e₁
            let mut worst = 0.0f64;
            let mut ys = Vec::with_capacity(shifts.len());
            for &z in shifts {
                let d = theta
                    .iter()
                    .map(|&t| (C64::new(t, 0.0) - z).norm())
                    .fold(f64::INFINITY, f64::min);
                if d < self.opts.distance_floor {
                    return Err(conditioning(z, d));
                }
                let c: Vec<C64> = (0..k)
                    .map(|i| C64::new(bn * s.read(0, i), 0.0) / (C64::new(theta[i], 0.0) - z))
                    .collect();
                let y: Vec<C64> = (0..k)
                    .map(|r| (0..k).map(|i| c[i] * s.read(r, i)).sum())
                    .collect();
                worst = worst.max(beta * y[k - 1].norm() / bn);
                ys.push(y);
            }
            if worst <= self.opts.tol || exhausted {
                return Ok(ys
                    .iter()
                    .map(|y| {
                        let re = kr.combine(|i| y[i].re);
                        let im = kr.combine(|i| y[i].im);
                        re.iter().zip(&im).map(|(a, b)| C64::new(*a, *b)).collect()
                    })
                    .collect());
            }
            if k >= self.opts.max_iter {
                return Err(Error::NoConvergence {
                    iterations: k,
                    residual: worst,
                });
            }
        }
    }
}

impl Resolvent for KrylovResolvent<'_> {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn solve_shifts(&self, shifts: &[C64], v: &[C64]) -> Result<Vec<Vec<C64>>> {
        let re: Vec<f64> = v.iter().map(|z| z.re).collect();
        let im: Vec<f64> = v.iter().map(|z| z.im).collect();
        let (a, b) = rayon::join(|| self.solve_real(shifts, &re), || self.solve_real(shifts, &im));
        let (a, b) = (a?, b?);
        Ok(a.iter()
            .zip(&b)
            .map(|(xa, xb)| xa.iter().zip(xb).map(|(p, q)| p + C64::new(0.0, 1.0) * q).collect())
            .collect())
    }

    fn solve_pairs(&self, shifts: &[C64], vs: &[Vec<C64>]) -> Result<Vec<Vec<C64>>> {
        shifts
            .par_iter()
            .zip(vs.par_iter())
            .map(|(&z, v)| self.solve_shifts(&[z], v).map(|mut x| x.remove(0)))
            .collect()
    }
}

/// Dense resolvent when the dimension allows, Krylov otherwise.
pub fn resolvent_for<'a>(op: &'a FockOperator, opts: &ResolventOptions) -> Result<Box<dyn Resolvent + 'a>> {
    if op.dim() <= opts.dense_limit {
        Ok(Box::new(DenseResolvent::new(op, opts.dense_limit, opts.distance_floor)?))
    } else {
        Ok(Box::new(KrylovResolvent::new(op, *opts)?))
    }
}

/// Solves `(A − z) x = v` iteratively.
pub fn resolvent_apply(op: &FockOperator, z: C64, v: &[C64], opts: &ResolventOptions) -> Result<Vec<C64>> {
    let r = KrylovResolvent::new(op, *opts)?;
    Ok(r.solve_shifts(&[z], v)?.remove(0))
}

/// `‖(A − z)x − v‖ / ‖v‖`.
pub fn relative_residual(op: &FockOperator, z: C64, x: &[C64], v: &[C64]) -> f64 {
    let ax = op.apply_complex(x);
    let r: Vec<C64> = ax.iter().zip(x).zip(v).map(|((a, xi), vi)| a - z * xi - vi).collect();
    linalg::cnorm(&r) / linalg::cnorm(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::Symmetry;

    fn test_op() -> FockOperator {
        let n = 40;
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, 0.1 * i as f64));
            if i + 1 < n {
                trip.push((i, i + 1, 0.05));
                trip.push((i + 1, i, 0.05));
            }
        }
        FockOperator::from_triplets(n, &trip, Symmetry::Symmetric)
    }

    #[test]
    fn diagonal_shift() {
        let d = FockOperator::diagonal(&[0.0, 1.0, 2.5]);
        let v = linalg::to_complex(&[1.0, 2.0, 3.0]);
        let x = resolvent_apply(&d, C64::new(-1.0, 0.0), &v, &ResolventOptions::default()).unwrap();
        for (i, want) in [1.0, 1.0, 3.0 / 3.5].iter().enumerate() {
            assert!((x[i] - C64::new(*want, 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn defining_property_and_dense_agreement() {
        let op = test_op();
        let v: Vec<C64> = (0..40).map(|i| C64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let zs = [C64::new(0.55, 0.02), C64::new(-0.3, 0.4), C64::new(2.0, -0.1)];
        let kr = KrylovResolvent::new(&op, ResolventOptions::default()).unwrap();
        let xk = kr.solve_shifts(&zs, &v).unwrap();
        let de = DenseResolvent::new(&op, 100, 1e-12).unwrap();
        let xd = de.solve_shifts(&zs, &v).unwrap();
        for (k, &z) in zs.iter().enumerate() {
            assert!(relative_residual(&op, z, &xk[k], &v) < 1e-11);
            let diff: Vec<C64> = xk[k].iter().zip(&xd[k]).map(|(a, b)| a - b).collect();
            assert!(linalg::cnorm(&diff) / linalg::cnorm(&xd[k]) < 1e-10);
        }
        let pairs = kr.solve_pairs(&zs, &[v.clone(), v.clone(), v.clone()]).unwrap();
        assert!(linalg::cnorm(&pairs[1].iter().zip(&xk[1]).map(|(a, b)| a - b).collect::<Vec<_>>()) < 1e-10);
    }

    #[test]
    fn near_singular_shift_is_rejected() {
        let d = FockOperator::diagonal(&[0.0, 1.0]);
        let v = linalg::to_complex(&[1.0, 1.0]);
        let err = resolvent_apply(&d, C64::new(1.0, 0.0), &v, &ResolventOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Conditioning { .. }));
        let de = DenseResolvent::new(&d, 10, 1e-10).unwrap();
        assert!(de.solve_shifts(&[C64::new(0.0, 0.0)], &v).is_err());
    }
}
