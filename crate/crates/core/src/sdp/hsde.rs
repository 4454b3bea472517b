//! Homogeneous self-dual interior-point method for the lowered conic form.
//!
//! The embedding
//!
//! ```text
//! [0]   [ 0   Aᵀ  Gᵀ  c ] [x]
//! [0] = [−A   0   0   b ] [y]      s, z ⪰ 0,  τ, κ ≥ 0
//! [s]   [−G   0   0   h ] [z]
//! [κ]   [−cᵀ −bᵀ −hᵀ  0 ] [τ]
//! ```
//!
//! is solved with Nesterov–Todd scaling and a Mehrotra predictor–corrector.
//! A limit point with `τ > 0` gives an optimal pair; `κ > 0` gives a Farkas
//! ray for whichever side is infeasible.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use super::lower::ConicForm;
use super::{SolveStatus, SolverOptions};

type Mats = Vec<DMatrix<f64>>;

const STEP_FRACTION: f64 = 0.99;
const REFINE_ROUNDS: usize = 6;
/// Relative eigenvalue of `KᵀK` below which a direction counts as unused.
const UNUSED_TOL: f64 = 1e-13;
/// Stop once residuals grow this much past a near-optimal iterate.
const DIVERGENCE_FACTOR: f64 = 1e4;
const NEAR_OPTIMAL_MERIT: f64 = 1e3;

pub(crate) struct HsdeOutput {
    pub status: SolveStatus,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub z: Mats,
    pub tau: f64,
    pub iterations: usize,
    pub pres: f64,
    pub dres: f64,
    pub pcost: f64,
    pub dcost: f64,
}

fn dot(a: &Mats, b: &Mats) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn norm(a: &Mats) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &Mats, y: &mut Mats) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += xi * alpha;
    }
}

/// `G x = −Σ x_k F_k` per cone.
fn apply_g(form: &ConicForm, x: &DVector<f64>) -> Mats {
    form.cones
        .iter()
        .map(|cone| {
            let mut out = DMatrix::zeros(cone.size, cone.size);
            for (k, trip) in &cone.cols {
                let xk = x[*k];
                if xk != 0.0 {
                    for &(r, c, v) in trip {
                        out[(r, c)] -= xk * v;
                    }
                }
            }
            out
        })
        .collect()
}

/// `(Gᵀ Z)_k = −Σ tr(F_k Z)`.
fn apply_gt(form: &ConicForm, z: &Mats) -> DVector<f64> {
    let mut out = DVector::zeros(form.n);
    for (cone, zc) in form.cones.iter().zip(z) {
        for (k, trip) in &cone.cols {
            let mut acc = 0.0;
            for &(r, c, v) in trip {
                acc += v * zc[(r, c)];
            }
            out[*k] -= acc;
        }
    }
    out
}

fn identity_mats(form: &ConicForm) -> Mats {
    form.cones
        .iter()
        .map(|c| DMatrix::identity(c.size, c.size))
        .collect()
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Lower factor `L` with `m = L Lᵀ` for a positive definite `m`.
fn psd_factor(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if let Some(ch) = Cholesky::new(m.clone()) {
        return Some(ch.unpack());
    }
    let eig = SymmetricEigen::new(m.clone());
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return None;
    }
    let mut v = eig.eigenvectors.clone();
    for (j, l) in eig.eigenvalues.iter().enumerate() {
        let r = l.sqrt();
        for i in 0..v.nrows() {
            v[(i, j)] *= r;
        }
    }
    Some(v)
}

/// Nesterov–Todd scaling `R` with `Rᵀ Z R = R⁻¹ S R⁻ᵀ = diag(λ)`.
struct Scaling {
    r: DMatrix<f64>,
    rinv: DMatrix<f64>,
    lambda: DVector<f64>,
}

impl Scaling {
    fn new(s: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<Self> {
        let ls = psd_factor(s)?;
        let lz = psd_factor(z)?;
        // Eigen-decomposition of Mᵀ M with M = L_zᵀ L_s. Near the central
        // path its eigenvalues are all close to μ, so squaring costs nothing.
        let m = lz.transpose() * &ls;
        let mut mtm = m.tr_mul(&m);
        symmetrize(&mut mtm);
        let eig = SymmetricEigen::new(mtm);
        let vt = eig.eigenvectors.transpose();
        let lambda = eig.eigenvalues.map(f64::sqrt);
        if lambda.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return None;
        }
        let ls_inv = ls.clone().try_inverse()?;
        let mut r = &ls * vt.transpose();
        let mut rinv = &vt * ls_inv;
        for j in 0..lambda.len() {
            let sq = lambda[j].sqrt();
            for i in 0..r.nrows() {
                r[(i, j)] /= sq;
                rinv[(j, i)] *= sq;
            }
        }
        Some(Self { r, rinv, lambda })
    }

    /// `Rᵀ U R`
    fn w(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        self.r.transpose() * u * &self.r
    }

    /// `R U Rᵀ`
    fn wt(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        &self.r * u * self.r.transpose()
    }

    /// `R⁻¹ U R⁻ᵀ`
    fn w_inv_t(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        &self.rinv * u * self.rinv.transpose()
    }

    /// Solves `λ ∘ u = r` for `u`, with `∘` the symmetrized product.
    fn jordan_div(&self, r: &DMatrix<f64>) -> DMatrix<f64> {
        let l = &self.lambda;
        DMatrix::from_fn(r.nrows(), r.ncols(), |i, j| 2.0 * r[(i, j)] / (l[i] + l[j]))
    }

    /// Largest `α` with `diag(λ) + α d ⪰ 0`.
    fn max_step(&self, d: &DMatrix<f64>) -> f64 {
        let l = &self.lambda;
        let mut scaled = DMatrix::from_fn(d.nrows(), d.ncols(), |i, j| {
            d[(i, j)] / (l[i] * l[j]).sqrt()
        });
        symmetrize(&mut scaled);
        let min = SymmetricEigen::new(scaled)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min < 0.0 {
            -1.0 / min
        } else {
            f64::INFINITY
        }
    }
}

fn jordan(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let ab = a * b;
    (&ab + ab.transpose()) * 0.5
}

/// Number of entries in the packed upper triangle of an `n × n` matrix.
fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Packs a symmetric matrix so that the Euclidean inner product of packed
/// vectors equals the trace inner product.
fn svec_into(m: &DMatrix<f64>, out: &mut [f64]) {
    let n = m.nrows();
    let mut idx = 0;
    for j in 0..n {
        for i in 0..=j {
            out[idx] = if i == j {
                m[(i, i)]
            } else {
                (m[(i, j)] + m[(j, i)]) * std::f64::consts::FRAC_1_SQRT_2
            };
            idx += 1;
        }
    }
}

fn smat(v: &[f64], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut idx = 0;
    for j in 0..n {
        for i in 0..=j {
            if i == j {
                m[(i, i)] = v[idx];
            } else {
                let x = v[idx] * std::f64::consts::FRAC_1_SQRT_2;
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
            idx += 1;
        }
    }
    m
}

/// Upper-triangular `R` with `Rᵀ R = BᵀB`, from a Householder QR of `B`.
/// Rows `eps·I` are appended when `B` is numerically rank deficient.
fn gram_factor(b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = b.ncols();
    let scale = (0..n).map(|j| b.column(j).norm()).fold(0.0, f64::max);
    if !scale.is_finite() {
        return None;
    }
    let scale = if scale > 0.0 { scale } else { 1.0 };
    for eps in [0.0, 1e-13, 1e-11, 1e-9, 1e-7] {
        let stacked = if eps == 0.0 {
            b.clone()
        } else {
            let mut m = DMatrix::zeros(b.nrows() + n, n);
            m.view_mut((0, 0), (b.nrows(), n)).copy_from(b);
            for i in 0..n {
                m[(b.nrows() + i, i)] = eps * scale;
            }
            m
        };
        if stacked.nrows() < n {
            continue;
        }
        let r = stacked.qr().r();
        let rmax = (0..n).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        if (0..n).all(|i| r[(i, i)].abs() > 1e-14 * rmax && r[(i, i)].is_finite()) {
            return Some(r);
        }
    }
    None
}

/// `(RᵀR)⁻¹ v`
fn gram_solve(r: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
    let t = r.tr_solve_upper_triangular(v).expect("nonsingular factor");
    r.solve_upper_triangular(&t).expect("nonsingular factor")
}

/// Orthonormal basis of the variable directions that change neither an
/// LMI nor an equality. Such directions leave the KKT system singular.
fn unused_directions(form: &ConicForm, a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = form.n;
    let mut gram = a.tr_mul(a);
    for cone in &form.cones {
        let len = svec_len(cone.size);
        let mut cols = DMatrix::zeros(len, n);
        let mut packed = vec![0.0; len];
        for (k, fk) in &cone.cols {
            let mut t = DMatrix::zeros(cone.size, cone.size);
            for &(r, c, v) in fk {
                t[(r, c)] += v;
            }
            svec_into(&t, &mut packed);
            for (i, v) in packed.iter().enumerate() {
                cols[(i, *k)] += v;
            }
        }
        gram += cols.tr_mul(&cols);
    }
    symmetrize(&mut gram);
    let eig = SymmetricEigen::new(gram);
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let null: Vec<usize> = (0..n)
        .filter(|&i| eig.eigenvalues[i] <= UNUSED_TOL * top)
        .collect();
    DMatrix::from_fn(n, null.len(), |i, j| eig.eigenvectors[(i, null[j])])
}

/// Factorization of the KKT operator
/// `(x, y, z) ↦ (Aᵀy + Gᵀz, A x, G x − H z)` with `H = W Wᵀ`, kept in
/// scaled coordinates `ẑ = Wᵀ z W`, `Ĝ x = W⁻¹ (G x) W⁻ᵀ`:
///
/// ```text
/// Aᵀ y + Ĝᵀ ẑ = u_x,   A x = u_y,   Ĝ x − ẑ = W⁻¹ u_z W⁻ᵀ.
/// ```
///
/// `Ĝ` stacked on `A` is factored by QR, so the squared matrix
/// `ĜᵀĜ + AᵀA` is never formed.
struct Kkt<'a> {
    form: &'a ConicForm,
    a: &'a DMatrix<f64>,
    scalings: &'a [Scaling],
    offsets: Vec<usize>,
    ghat: DMatrix<f64>,
    /// `Rᵀ R = ĜᵀĜ + AᵀA`
    r: DMatrix<f64>,
    /// `R⁻ᵀ Aᵀ`
    b: DMatrix<f64>,
    /// `R_yᵀ R_y = A (ĜᵀĜ + AᵀA)⁻¹ Aᵀ`
    ry: Option<DMatrix<f64>>,
}

impl<'a> Kkt<'a> {
    fn new(
        form: &'a ConicForm,
        a: &'a DMatrix<f64>,
        scalings: &'a [Scaling],
        unused: &DMatrix<f64>,
    ) -> Option<Self> {
        let n = form.n;
        let mut offsets = Vec::with_capacity(form.cones.len());
        let mut rows = 0;
        for cone in &form.cones {
            offsets.push(rows);
            rows += svec_len(cone.size);
        }
        let m = a.nrows();
        let mut stacked = DMatrix::zeros(rows + m, n);
        let mut packed = vec![0.0; 0];
        for ((cone, sc), &off) in form.cones.iter().zip(scalings).zip(&offsets) {
            let len = svec_len(cone.size);
            packed.resize(len, 0.0);
            for (k, fk) in &cone.cols {
                // W⁻¹ (−F_k) W⁻ᵀ
                let mut t = DMatrix::zeros(cone.size, cone.size);
                for &(r, c, v) in fk {
                    t.ger(-v, &sc.rinv.column(r), &sc.rinv.column(c), 1.0);
                }
                svec_into(&t, &mut packed);
                for (i, v) in packed.iter().enumerate() {
                    stacked[(off + i, *k)] += v;
                }
            }
        }
        stacked.view_mut((rows, 0), (m, n)).copy_from(a);
        let r = if unused.ncols() == 0 {
            gram_factor(&stacked)?
        } else {
            // Pin directions no constraint sees; they decouple from the rest.
            let scale = (0..n)
                .map(|j| stacked.column(j).norm())
                .fold(0.0, f64::max)
                .max(1.0);
            let k = unused.ncols();
            let mut pinned = DMatrix::zeros(rows + m + k, n);
            pinned.view_mut((0, 0), (rows + m, n)).copy_from(&stacked);
            pinned
                .view_mut((rows + m, 0), (k, n))
                .copy_from(&(unused.transpose() * scale));
            gram_factor(&pinned)?
        };
        let ghat = stacked.rows(0, rows).into_owned();
        let b = r.tr_solve_upper_triangular(&a.transpose())?;
        let ry = if m > 0 { Some(gram_factor(&b)?) } else { None };
        Some(Self {
            form,
            a,
            scalings,
            offsets,
            ghat,
            r,
            b,
            ry,
        })
    }

    fn solve_scaled(
        &self,
        ux: &DVector<f64>,
        uy: &DVector<f64>,
        uz: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let r1 = ux + self.ghat.tr_mul(uz) + self.a.tr_mul(uy);
        let w = gram_solve(&self.r, &r1);
        let (x, y) = match &self.ry {
            Some(ry) => {
                let y = gram_solve(ry, &(self.a * &w - uy));
                let corr = self
                    .r
                    .solve_upper_triangular(&(&self.b * &y))
                    .expect("nonsingular factor");
                (w - corr, y)
            }
            None => (w, DVector::zeros(0)),
        };
        let z = &self.ghat * &x - uz;
        (x, y, z)
    }

    fn residual(
        &self,
        ux: &DVector<f64>,
        uy: &DVector<f64>,
        uz: &DVector<f64>,
        x: &DVector<f64>,
        y: &DVector<f64>,
        z: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let ex = ux - self.a.tr_mul(y) - self.ghat.tr_mul(z);
        let ey = uy - self.a * x;
        let ez = uz - (&self.ghat * x - z);
        (ex, ey, ez)
    }

    /// Solve with iterative refinement in scaled coordinates, stopping once
    /// the residual no longer shrinks.
    fn solve(
        &self,
        ux: &DVector<f64>,
        uy: &DVector<f64>,
        uz: &Mats,
    ) -> (DVector<f64>, DVector<f64>, Mats) {
        let mut uz_hat = DVector::zeros(self.ghat.nrows());
        for ((u, sc), &off) in uz.iter().zip(self.scalings).zip(&self.offsets) {
            let len = svec_len(u.nrows());
            svec_into(&sc.w_inv_t(u), &mut uz_hat.as_mut_slice()[off..off + len]);
        }
        let (mut x, mut y, mut z) = self.solve_scaled(ux, uy, &uz_hat);
        let size = |e: &(DVector<f64>, DVector<f64>, DVector<f64>)| {
            (e.0.norm_squared() + e.1.norm_squared() + e.2.norm_squared()).sqrt()
        };
        let mut err = self.residual(ux, uy, &uz_hat, &x, &y, &z);
        let mut err_norm = size(&err);
        for _ in 0..REFINE_ROUNDS {
            if err_norm == 0.0 {
                break;
            }
            let (dx, dy, dz) = self.solve_scaled(&err.0, &err.1, &err.2);
            let (nx, ny, nz) = (&x + dx, &y + dy, &z + dz);
            let next = self.residual(ux, uy, &uz_hat, &nx, &ny, &nz);
            let next_norm = size(&next);
            if !(next_norm < err_norm) {
                break;
            }
            let improved = next_norm < 0.5 * err_norm;
            (x, y, z, err, err_norm) = (nx, ny, nz, next, next_norm);
            if !improved {
                break;
            }
        }
        let z = self
            .form
            .cones
            .iter()
            .zip(self.scalings)
            .zip(&self.offsets)
            .map(|((cone, sc), &off)| {
                let zh = smat(&z.as_slice()[off..off + svec_len(cone.size)], cone.size);
                // z = W⁻ᵀ ẑ W⁻¹
                sc.rinv.transpose() * zh * &sc.rinv
            })
            .collect();
        (x, y, z)
    }
}

/// Iterate with the smallest worst-case ratio of residual to tolerance.
struct Snapshot {
    merit: f64,
    x: DVector<f64>,
    y: DVector<f64>,
    z: Mats,
    tau: f64,
    pres: f64,
    dres: f64,
    pcost: f64,
    dcost: f64,
}

struct Residuals {
    rx: DVector<f64>,
    ry: DVector<f64>,
    rz: Mats,
    rt: f64,
}

pub(crate) fn solve_hsde(
    form: &ConicForm,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    opts: &SolverOptions,
) -> HsdeOutput {
    let c = &form.c;
    let h: Mats = form.cones.iter().map(|k| k.f0.clone()).collect();
    let nu = form.nu() as f64;
    let resx0 = c.norm().max(1.0);
    let resy0 = b.norm().max(1.0);
    let resz0 = norm(&h).max(1.0);

    let unused = unused_directions(form, a);
    let mut x = DVector::zeros(form.n);
    let mut y = DVector::zeros(a.nrows());
    let mut s = identity_mats(form);
    let mut z = identity_mats(form);
    let mut tau = 1.0;
    let mut kappa = 1.0;

    let residuals =
        |x: &DVector<f64>, y: &DVector<f64>, s: &Mats, z: &Mats, tau: f64, kappa: f64| {
            let rx = a.transpose() * y + apply_gt(form, z) + c * tau;
            let ry = b * tau - a * x;
            let gx = apply_g(form, x);
            let rz: Mats = s
                .iter()
                .zip(&gx)
                .zip(&h)
                .map(|((si, gi), hi)| si + gi - hi * tau)
                .collect();
            let rt = kappa + c.dot(x) + b.dot(y) + dot(&h, z);
            Residuals { rx, ry, rz, rt }
        };

    let status;
    let mut iterations = 0;
    let (mut pres, mut dres, mut pcost, mut dcost);
    let mut best: Option<Snapshot> = None;

    loop {
        let res = residuals(&x, &y, &s, &z, tau, kappa);
        pres = (res.ry.norm() / resy0).max(norm(&res.rz) / resz0) / tau;
        dres = res.rx.norm() / resx0 / tau;
        let cx = c.dot(&x);
        let byhz = b.dot(&y) + dot(&h, &z);
        pcost = cx / tau;
        dcost = -byhz / tau;
        let gap = dot(&s, &z) / (tau * tau);

        if !(pres.is_finite() && dres.is_finite() && gap.is_finite()) {
            status = SolveStatus::NumericalFailure;
            break;
        }
        if opts.verbose {
            eprintln!(
                "{iterations:>3}  pres {pres:.2e}  dres {dres:.2e}  gap {gap:.2e}  \
                 pcost {pcost:+.9e}  dcost {dcost:+.9e}  tau {tau:.2e}  kappa {kappa:.2e}"
            );
        }
        let merit = (pres / opts.feas_tol)
            .max(dres / opts.feas_tol)
            .max(gap / opts.gap_tol)
            .max((pcost - dcost).abs() / opts.gap_tol);
        match &best {
            Some(b) if merit > DIVERGENCE_FACTOR * b.merit && b.merit < NEAR_OPTIMAL_MERIT => {
                status = SolveStatus::NumericalFailure;
                break;
            }
            Some(b) if merit >= b.merit => {}
            _ => {
                best = Some(Snapshot {
                    merit,
                    x: x.clone(),
                    y: y.clone(),
                    z: z.clone(),
                    tau,
                    pres,
                    dres,
                    pcost,
                    dcost,
                })
            }
        }
        if pres <= opts.feas_tol
            && dres <= opts.feas_tol
            && gap <= opts.gap_tol
            && (pcost - dcost).abs() <= opts.gap_tol
        {
            status = SolveStatus::Optimal;
            break;
        }
        if byhz < 0.0 {
            let hres = (a.transpose() * &y + apply_gt(form, &z)).norm() / resx0;
            if hres / -byhz <= opts.infeas_tol {
                status = SolveStatus::PrimalInfeasible;
                break;
            }
        }
        if cx < 0.0 {
            let ax = (a * &x).norm() / resy0;
            let gxs: Mats = apply_g(form, &x)
                .iter()
                .zip(&s)
                .map(|(g, si)| g + si)
                .collect();
            let hres = ax.max(norm(&gxs) / resz0);
            if hres / -cx <= opts.infeas_tol {
                status = SolveStatus::DualInfeasible;
                break;
            }
        }
        if iterations >= opts.max_iter {
            status = SolveStatus::MaxIterations;
            break;
        }
        iterations += 1;

        let scalings: Option<Vec<Scaling>> = s
            .iter()
            .zip(&z)
            .map(|(si, zi)| Scaling::new(si, zi))
            .collect();
        let Some(scalings) = scalings else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let Some(kkt) = Kkt::new(form, a, &scalings, &unused) else {
            status = SolveStatus::NumericalFailure;
            break;
        };

        let mu = (dot(&s, &z) + tau * kappa) / (nu + 1.0);
        let neg_c = -c;
        let (x1, y1, z1) = kkt.solve(&neg_c, b, &h);
        let denom = c.dot(&x1) + b.dot(&y1) + dot(&h, &z1) - kappa / tau;

        let lambda_sq: Mats = scalings
            .iter()
            .map(|sc| DMatrix::from_diagonal(&sc.lambda.map(|l| l * l)))
            .collect();

        let mut affine_corr: Option<(Mats, f64)> = None;
        let mut sigma = 0.0;
        let mut step = None;
        for phase in 0..2 {
            let (eta, rc, rk): (f64, Mats, f64) = if phase == 0 {
                (1.0, lambda_sq.iter().map(|l| -l).collect(), -tau * kappa)
            } else {
                let (corr, tk) = affine_corr.as_ref().expect("affine step first");
                let rc = lambda_sq
                    .iter()
                    .zip(corr)
                    .map(|(l, cc)| {
                        let mut m = -l - cc;
                        for i in 0..m.nrows() {
                            m[(i, i)] += sigma * mu;
                        }
                        m
                    })
                    .collect();
                (1.0 - sigma, rc, -tau * kappa + sigma * mu - tk)
            };

            let qs: Mats = scalings
                .iter()
                .zip(&rc)
                .map(|(sc, r)| sc.jordan_div(r))
                .collect();
            let wtq: Mats = scalings.iter().zip(&qs).map(|(sc, q)| sc.wt(q)).collect();
            let ux = &res.rx * (-eta);
            let uy = &res.ry * eta;
            let uz: Mats = res
                .rz
                .iter()
                .zip(&wtq)
                .map(|(r, w)| -(r * eta) - w)
                .collect();
            let (x2, y2, z2) = kkt.solve(&ux, &uy, &uz);
            let dtau = (-eta * res.rt - rk / tau - c.dot(&x2) - b.dot(&y2) - dot(&h, &z2)) / denom;
            let dx = &x2 + &x1 * dtau;
            let dy = &y2 + &y1 * dtau;
            let mut dz = z2;
            axpy(dtau, &z1, &mut dz);
            // From the linearized residual equation `ds + G dx − h dτ = −η r_z`
            // rather than `ds = Wᵀq − H dz`: `H` and its inverse only
            // cancel to about ε/μ, and that error would land in the primal
            // residual.
            let ds: Mats = apply_g(form, &dx)
                .iter()
                .zip(&res.rz)
                .zip(&h)
                .map(|((g, r), hi)| {
                    let mut d = hi * dtau - r * eta - g;
                    symmetrize(&mut d);
                    d
                })
                .collect();
            let dkappa = (rk - kappa * dtau) / tau;

            let ds_scaled: Mats = scalings
                .iter()
                .zip(&ds)
                .map(|(sc, d)| sc.w_inv_t(d))
                .collect();
            let dz_scaled: Mats = scalings.iter().zip(&dz).map(|(sc, d)| sc.w(d)).collect();
            let mut alpha = f64::INFINITY;
            for (sc, (dsi, dzi)) in scalings.iter().zip(ds_scaled.iter().zip(&dz_scaled)) {
                alpha = alpha.min(sc.max_step(dsi)).min(sc.max_step(dzi));
            }
            if dtau < 0.0 {
                alpha = alpha.min(-tau / dtau);
            }
            if dkappa < 0.0 {
                alpha = alpha.min(-kappa / dkappa);
            }

            if phase == 0 {
                let a_aff = alpha.min(1.0);
                sigma = (1.0 - a_aff).powi(3);
                let corr = ds_scaled
                    .iter()
                    .zip(&dz_scaled)
                    .map(|(d1, d2)| jordan(d1, d2))
                    .collect();
                affine_corr = Some((corr, dtau * dkappa));
            } else {
                step = Some((alpha, dx, dy, ds, dz, dtau, dkappa));
            }
        }

        let (alpha, dx, dy, ds, dz, dtau, dkappa) = step.expect("combined step");
        let alpha = (STEP_FRACTION * alpha).min(1.0);
        if !alpha.is_finite() || alpha < 1e-14 {
            status = SolveStatus::NumericalFailure;
            break;
        }
        x += &dx * alpha;
        y += &dy * alpha;
        axpy(alpha, &ds, &mut s);
        axpy(alpha, &dz, &mut z);
        for m in s.iter_mut().chain(z.iter_mut()) {
            symmetrize(m);
        }
        tau += alpha * dtau;
        kappa += alpha * dkappa;
    }

    // A failed run reports the closest point it reached instead of the last.
    if matches!(
        status,
        SolveStatus::NumericalFailure | SolveStatus::MaxIterations
    ) {
        if let Some(b) = best {
            (x, y, z, tau, pres, dres, pcost, dcost) =
                (b.x, b.y, b.z, b.tau, b.pres, b.dres, b.pcost, b.dcost);
        }
    }

    HsdeOutput {
        status,
        x,
        y,
        z,
        tau,
        iterations,
        pres,
        dres,
        pcost,
        dcost,
    }
}
