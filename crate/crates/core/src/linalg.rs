//! Tiny dense 2x2 kernel used everywhere on the geometry side. The
//! discretized operators live in `spectral::sparse` instead.

/// Row-major symmetric-or-not 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub m: [[f64; 2]; 2],
}

pub const EYE2: Mat2 = Mat2 {
    m: [[1.0, 0.0], [0.0, 1.0]],
};

pub const ZERO2: Mat2 = Mat2 {
    m: [[0.0, 0.0], [0.0, 0.0]],
};

impl Mat2 {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { m: [[a, b], [c, d]] }
    }

    pub fn diag(a: f64, d: f64) -> Self {
        Mat2::new(a, 0.0, 0.0, d)
    }

    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2::new(self.m[0][0], self.m[1][0], self.m[0][1], self.m[1][1])
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2::new(
            self.m[0][0] * s,
            self.m[0][1] * s,
            self.m[1][0] * s,
            self.m[1][1] * s,
        )
    }

    pub fn add(&self, o: &Mat2) -> Mat2 {
        Mat2::new(
            self.m[0][0] + o.m[0][0],
            self.m[0][1] + o.m[0][1],
            self.m[1][0] + o.m[1][0],
            self.m[1][1] + o.m[1][1],
        )
    }

    pub fn sub(&self, o: &Mat2) -> Mat2 {
        self.add(&o.scale(-1.0))
    }

    pub fn matmul(&self, o: &Mat2) -> Mat2 {
        let a = &self.m;
        let b = &o.m;
        Mat2::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }

    pub fn matvec(&self, x: [f64; 2]) -> [f64; 2] {
        [
            self.m[0][0] * x[0] + self.m[0][1] * x[1],
            self.m[1][0] * x[0] + self.m[1][1] * x[1],
        ]
    }

    pub fn inverse(&self) -> Mat2 {
        let d = self.det();
        Mat2::new(
            self.m[1][1] / d,
            -self.m[0][1] / d,
            -self.m[1][0] / d,
            self.m[0][0] / d,
        )
    }

    /// Solve A x = b.
    pub fn solve(&self, b: [f64; 2]) -> [f64; 2] {
        self.inverse().matvec(b)
    }

    /// Smallest eigenvalue of a symmetric 2x2 matrix. The discriminant is
    /// written as (a-d)^2 + 4bc, which stays accurate when the two
    /// eigenvalues nearly coincide (tr^2 - 4 det cancels catastrophically
    /// there).
    pub fn sym_eig_min(&self) -> f64 {
        let t = self.trace();
        let disc = ((self.m[0][0] - self.m[1][1]).powi(2)
            + 4.0 * self.m[0][1] * self.m[1][0])
            .max(0.0)
            .sqrt();
        0.5 * (t - disc)
    }

    /// Largest singular value (operator norm).
    pub fn op_norm(&self) -> f64 {
        let ata = self.transpose().matmul(self);
        let t = ata.trace();
        let disc = ((ata.m[0][0] - ata.m[1][1]).powi(2)
            + 4.0 * ata.m[0][1] * ata.m[1][0])
            .max(0.0)
            .sqrt();
        (0.5 * (t + disc)).max(0.0).sqrt()
    }

    pub fn frob_norm(&self) -> f64 {
        self.m
            .iter()
            .flatten()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }
}

/// Eigenvalues of the symmetric pencil (S, g): solve S w = lambda g w with
/// g positive definite. Returns (min, max). Exact 2x2 closed form on
/// g^{-1} S, whose eigenvalues are real because it is similar to a
/// symmetric matrix.
pub fn generalized_sym_eigs(s: &Mat2, g: &Mat2) -> (f64, f64) {
    let b = g.inverse().matmul(s);
    let t = b.trace();
    // cancellation-free discriminant; real because b is similar to symmetric
    let disc = ((b.m[0][0] - b.m[1][1]).powi(2) + 4.0 * b.m[0][1] * b.m[1][0])
        .max(0.0)
        .sqrt();
    (0.5 * (t - disc), 0.5 * (t + disc))
}

pub fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Inner product of coordinate vectors against the metric g.
pub fn g_inner(g: &Mat2, a: [f64; 2], b: [f64; 2]) -> f64 {
    dot2(a, g.matvec(b))
}

pub fn g_norm(g: &Mat2, a: [f64; 2]) -> f64 {
    g_inner(g, a, a).max(0.0).sqrt()
}

/// Gram-Schmidt the columns of `frame` in the g inner product.
pub fn orthonormalize_frame(g: &Mat2, frame: &Mat2) -> Mat2 {
    let mut c0 = [frame.m[0][0], frame.m[1][0]];
    let mut c1 = [frame.m[0][1], frame.m[1][1]];
    let n0 = g_norm(g, c0);
    c0 = [c0[0] / n0, c0[1] / n0];
    let proj = g_inner(g, c1, c0);
    c1 = [c1[0] - proj * c0[0], c1[1] - proj * c0[1]];
    let n1 = g_norm(g, c1);
    c1 = [c1[0] / n1, c1[1] / n1];
    Mat2::new(c0[0], c1[0], c0[1], c1[1])
}
