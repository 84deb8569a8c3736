use nalgebra::{Matrix3, SMatrix, SVector};

use super::{
    essential_from_pose, rotation_from_bearings, EssentialMatrix, GeometryError, Mat3, Vec2, Vec3,
};

/// Monomials of degree ≤ 3 in (x, y, z): the ten cubics first, then the
/// quotient-ring basis `x², xy, xz, y², yz, z², x, y, z, 1`.
const MONOMIALS: [(u8, u8, u8); 20] = [
    (3, 0, 0),
    (2, 1, 0),
    (2, 0, 1),
    (1, 2, 0),
    (1, 1, 1),
    (1, 0, 2),
    (0, 3, 0),
    (0, 2, 1),
    (0, 1, 2),
    (0, 0, 3),
    (2, 0, 0),
    (1, 1, 0),
    (1, 0, 1),
    (0, 2, 0),
    (0, 1, 1),
    (0, 0, 2),
    (1, 0, 0),
    (0, 1, 0),
    (0, 0, 1),
    (0, 0, 0),
];

const NONE: u8 = u8::MAX;

/// `PRODUCT[i][j]`: index of monomial i × monomial j, `NONE` past degree 3.
const PRODUCT: [[u8; 20]; 20] = {
    let mut t = [[NONE; 20]; 20];
    let mut i = 0;
    while i < 20 {
        let mut j = 0;
        while j < 20 {
            let (a, b) = (MONOMIALS[i], MONOMIALS[j]);
            let e = (a.0 + b.0, a.1 + b.1, a.2 + b.2);
            let mut k = 0;
            while k < 20 {
                let m = MONOMIALS[k];
                if m.0 == e.0 && m.1 == e.1 && m.2 == e.2 {
                    t[i][j] = k as u8;
                }
                k += 1;
            }
            j += 1;
        }
        i += 1;
    }
    t
};

/// Polynomial of total degree ≤ 3 in three unknowns.
#[derive(Clone, Copy)]
struct Cubic([f64; 20]);

impl Cubic {
    fn zero() -> Self {
        Self([0.0; 20])
    }

    fn linear(x: f64, y: f64, z: f64, w: f64) -> Self {
        let mut p = Self::zero();
        p.0[16] = x;
        p.0[17] = y;
        p.0[18] = z;
        p.0[19] = w;
        p
    }

    fn mul(&self, other: &Cubic) -> Cubic {
        let mut out = Cubic::zero();
        for (i, a) in self.0.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            for (j, b) in other.0.iter().enumerate() {
                if *b == 0.0 {
                    continue;
                }
                let k = PRODUCT[i][j];
                assert!(k != NONE, "degree exceeds 3");
                out.0[k as usize] += a * b;
            }
        }
        out
    }

    fn add(&self, other: &Cubic) -> Cubic {
        let mut out = *self;
        for (o, b) in out.0.iter_mut().zip(other.0.iter()) {
            *o += b;
        }
        out
    }

    fn scale(&self, s: f64) -> Cubic {
        let mut out = *self;
        out.0.iter_mut().for_each(|c| *c *= s);
        out
    }

    fn eval(&self, p: &[f64; 3]) -> f64 {
        let pw = powers(p);
        MONOMIALS
            .iter()
            .zip(self.0.iter())
            .map(|(&(a, b, c), k)| k * pw[0][a as usize] * pw[1][b as usize] * pw[2][c as usize])
            .sum()
    }

    fn gradient(&self, p: &[f64; 3]) -> [f64; 3] {
        let pw = powers(p);
        let mut g = [0.0; 3];
        for (&(a, b, c), k) in MONOMIALS.iter().zip(self.0.iter()) {
            let e = [a as usize, b as usize, c as usize];
            for (v, gv) in g.iter_mut().enumerate() {
                if e[v] == 0 {
                    continue;
                }
                let mut term = k * e[v] as f64;
                for (w, &ew) in e.iter().enumerate() {
                    term *= pw[w][if w == v { ew - 1 } else { ew }];
                }
                *gv += term;
            }
        }
        g
    }
}

fn powers(p: &[f64; 3]) -> [[f64; 4]; 3] {
    p.map(|v| [1.0, v, v * v, v * v * v])
}

/// Minimal five-point relative pose: every essential matrix consistent with
/// the first five normalized correspondences.
///
/// `E = xX + yY + zZ + W` spans the nullspace of the epipolar equations; the
/// cubic rank and trace constraints are reduced by Gauss–Jordan elimination
/// and the real solutions read off the eigenvectors of the action matrix for
/// multiplication by `x`.
pub fn five_point_essential(pairs: &[(Vec2, Vec2)]) -> Result<Vec<EssentialMatrix>, GeometryError> {
    if pairs.len() < 5 {
        return Err(GeometryError::InsufficientCorrespondences {
            needed: 5,
            got: pairs.len(),
        });
    }
    let pairs = &pairs[..5];

    let mut q = SMatrix::<f64, 9, 9>::zeros();
    for (i, (xa, xb)) in pairs.iter().enumerate() {
        let (ha, hb) = (xa.push(1.0), xb.push(1.0));
        let row_norm = ha.norm() * hb.norm();
        for r in 0..3 {
            for c in 0..3 {
                q[(i, 3 * r + c)] = hb[r] * ha[c] / row_norm;
            }
        }
    }
    let svd = q.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or(GeometryError::DegenerateConfiguration("svd failed"))?;
    let mut order: Vec<usize> = (0..9).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sv = |k: usize| svd.singular_values[order[k]];
    if sv(4) <= 1e-10 * sv(0) {
        return Err(GeometryError::DegenerateConfiguration(
            "correspondences do not constrain five degrees of freedom",
        ));
    }
    let basis: Vec<Mat3> = (5..9)
        .map(|k| {
            let row = v_t.row(order[k]);
            Matrix3::from_fn(|r, c| row[3 * r + c])
        })
        .collect();
    let (bx, by, bz, bw) = (basis[0], basis[1], basis[2], basis[3]);

    let e: [[Cubic; 3]; 3] = std::array::from_fn(|r| {
        std::array::from_fn(|c| Cubic::linear(bx[(r, c)], by[(r, c)], bz[(r, c)], bw[(r, c)]))
    });
    let constraints = essential_constraints(&e);

    let mut m = SMatrix::<f64, 10, 20>::zeros();
    for (i, p) in constraints.iter().enumerate() {
        for j in 0..20 {
            m[(i, j)] = p.0[j];
        }
    }
    let Some(b) = gauss_jordan(m) else {
        return Ok(rotation_only_candidates(pairs));
    };

    // x · basis expressed in the basis
    let mut action = SMatrix::<f64, 10, 10>::zeros();
    for k in 0..6 {
        for j in 0..10 {
            action[(k, j)] = -b[(k, j)];
        }
    }
    action[(6, 0)] = 1.0;
    action[(7, 1)] = 1.0;
    action[(8, 2)] = 1.0;
    action[(9, 6)] = 1.0;

    let mut out: Vec<EssentialMatrix> = Vec::new();
    for lambda in action.complex_eigenvalues().iter() {
        if lambda.im.abs() > 1e-6 * (1.0 + lambda.re.abs()) {
            continue;
        }
        let Some(v) = eigenvector(&action, lambda.re) else {
            continue;
        };
        if v[9].abs() < 1e-12 {
            continue;
        }
        let guess = [lambda.re, v[7] / v[9], v[8] / v[9]];
        let sol = polish(&constraints, guess);
        let em = bx * sol[0] + by * sol[1] + bz * sol[2] + bw;
        if !em.iter().all(|x| x.is_finite()) || em.norm() == 0.0 {
            continue;
        }
        let cand = EssentialMatrix(em).normalized();
        let (det, trace) = cand.constraint_residuals();
        let epi = pairs
            .iter()
            .map(|(a, b)| cand.algebraic_residual(a, b).abs())
            .fold(0.0, f64::max);
        if det > 1e-8 || trace > 1e-8 || epi > 1e-8 {
            continue;
        }
        if out.iter().all(|o| o.distance_up_to_scale(&cand) > 1e-9) {
            out.push(cand);
        }
    }
    if out.is_empty() {
        return Ok(rotation_only_candidates(pairs));
    }
    Ok(out)
}

/// Inverse iteration with a slightly perturbed shift.
fn eigenvector(a: &SMatrix<f64, 10, 10>, lambda: f64) -> Option<SVector<f64, 10>> {
    let shift = lambda + 1e-10 * (1.0 + lambda.abs());
    let lu = (a - SMatrix::<f64, 10, 10>::identity() * shift).lu();
    let mut v = SVector::<f64, 10>::repeat(1.0);
    for _ in 0..3 {
        let w = lu.solve(&v)?;
        let n = w.norm();
        if !(n.is_finite() && n > 0.0) {
            return None;
        }
        v = w / n;
    }
    Some(v)
}

/// When the sample is explained by a rotation alone the solution set is a
/// continuum `E = [t]× R` over all `t`; return one member per axis so that
/// callers still see candidates and can flag the degeneracy downstream.
fn rotation_only_candidates(pairs: &[(Vec2, Vec2)]) -> Vec<EssentialMatrix> {
    let bearings: Vec<_> = pairs
        .iter()
        .map(|(a, b)| (a.push(1.0).normalize(), b.push(1.0).normalize()))
        .collect();
    let Some(r) = rotation_from_bearings(&bearings) else {
        return Vec::new();
    };
    let explained = bearings
        .iter()
        .all(|(fa, fb)| (r * fa).cross(fb).norm() < 1e-9);
    if !explained {
        return Vec::new();
    }
    [Vec3::x(), Vec3::y(), Vec3::z()]
        .iter()
        .map(|t| essential_from_pose(&r, t).normalized())
        .collect()
}

fn essential_constraints(e: &[[Cubic; 3]; 3]) -> [Cubic; 10] {
    let mut eet = [[Cubic::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                eet[i][j] = eet[i][j].add(&e[i][k].mul(&e[j][k]));
            }
        }
    }
    let trace = eet[0][0].add(&eet[1][1]).add(&eet[2][2]);
    let mut out = [Cubic::zero(); 10];
    for i in 0..3 {
        for j in 0..3 {
            let mut acc = Cubic::zero();
            for k in 0..3 {
                acc = acc.add(&eet[i][k].mul(&e[k][j]));
            }
            out[3 * i + j] = acc.scale(2.0).add(&trace.mul(&e[i][j]).scale(-1.0));
        }
    }
    let minor = |a: usize, b: usize, c: usize, d: usize| {
        e[1][a].mul(&e[2][b]).add(&e[1][c].mul(&e[2][d]).scale(-1.0))
    };
    out[9] = e[0][0]
        .mul(&minor(1, 2, 2, 1))
        .add(&e[0][1].mul(&minor(0, 2, 2, 0)).scale(-1.0))
        .add(&e[0][2].mul(&minor(0, 1, 1, 0)));
    out
}

/// Eliminates the cubic columns; returns `B` with `m_cubic = −B · basis`.
fn gauss_jordan(mut m: SMatrix<f64, 10, 20>) -> Option<SMatrix<f64, 10, 10>> {
    let scale = m.amax();
    if scale == 0.0 {
        return None;
    }
    for col in 0..10 {
        let (piv, pval) = (col..10)
            .map(|r| (r, m[(r, col)].abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))?;
        if pval <= 1e-14 * scale {
            return None;
        }
        m.swap_rows(col, piv);
        let p = m[(col, col)];
        for j in 0..20 {
            m[(col, j)] /= p;
        }
        for r in 0..10 {
            if r != col {
                let f = m[(r, col)];
                if f != 0.0 {
                    for j in 0..20 {
                        m[(r, j)] -= f * m[(col, j)];
                    }
                }
            }
        }
    }
    Some(m.fixed_view::<10, 10>(0, 10).into_owned())
}

/// Gauss–Newton on the ten constraints in (x, y, z).
fn polish(constraints: &[Cubic; 10], mut p: [f64; 3]) -> [f64; 3] {
    let cost = |p: &[f64; 3]| constraints.iter().map(|c| c.eval(p).powi(2)).sum::<f64>();
    let mut current = cost(&p);
    for _ in 0..5 {
        let mut jtj = Matrix3::<f64>::zeros();
        let mut jtr = SVector::<f64, 3>::zeros();
        for c in constraints {
            let r = c.eval(&p);
            let g = SVector::<f64, 3>::from(c.gradient(&p));
            jtj += g * g.transpose();
            jtr += g * r;
        }
        let Some(step) = jtj.lu().solve(&jtr) else {
            break;
        };
        let cand = [p[0] - step[0], p[1] - step[1], p[2] - step[2]];
        let c = cost(&cand);
        if c < current {
            p = cand;
            current = c;
        } else {
            break;
        }
    }
    p
}
