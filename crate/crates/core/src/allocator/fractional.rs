use nalgebra::DVector;

/// Sum of linear-fractional terms plus a constant:
/// `f(z) = sum_i (c_i^T z + d_i) / (e_i^T z + s_i) + constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalProgram {
    pub terms: Vec<FractionalTerm>,
    /// z-independent part of the outer objective (prior information).
    pub constant: f64,
    /// Count of weights that came out negative and were clamped to zero.
    pub clamped_weights: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FractionalTerm {
    pub c: DVector<f64>,
    pub d: f64,
    pub e: DVector<f64>,
    /// Receiver noise variance of the radar.
    pub sigma2: f64,
}

impl FractionalTerm {
    pub fn numerator(&self, z: &DVector<f64>) -> f64 {
        self.c.dot(z) + self.d
    }

    pub fn denominator(&self, z: &DVector<f64>) -> f64 {
        self.e.dot(z) + self.sigma2
    }
}

impl FractionalProgram {
    pub fn value(&self, z: &DVector<f64>) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|t| t.numerator(z) / t.denominator(z))
                .sum::<f64>()
    }
}

/// Quotient-rule gradient of the fractional sum.
pub fn grad_f(fp: &FractionalProgram, z: &DVector<f64>) -> DVector<f64> {
    fp.terms
        .iter()
        .fold(DVector::zeros(z.len()), |mut acc, t| {
            let den = t.denominator(z);
            let num = t.numerator(z);
            acc += &t.c * (1.0 / den);
            acc -= &t.e * (num / (den * den));
            acc
        })
}
