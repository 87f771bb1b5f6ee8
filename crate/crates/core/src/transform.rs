//! From intervals to SVM weights and labels, the Bayes score, and the two losses.

use crate::bounds::Interval;

/// Sign conventions. The generic sign sends 0 to -1; the Bayes rule sends a zero score to +1.
pub struct SgnConvention;

impl SgnConvention {
    pub fn sgn(t: f64) -> f64 {
        if t > 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn bayes(eta: f64) -> f64 {
        if eta >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }
}

pub fn sgn(t: f64) -> f64 {
    SgnConvention::sgn(t)
}

/// Which side of zero the interval lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatentClass {
    Plus,
    Minus,
    Unlabeled,
}

pub fn latent_class(iv: &Interval) -> LatentClass {
    if iv.l > 0.0 {
        LatentClass::Plus
    } else if iv.u < 0.0 {
        LatentClass::Minus
    } else {
        LatentClass::Unlabeled
    }
}

/// SVM training triple. The hinge `w (1 + e f)^+` pushes `sgn f` toward `-e`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedLabel {
    pub w: f64,
    pub e: f64,
    pub latent: LatentClass,
}

pub fn weight_label(iv: &Interval) -> WeightedLabel {
    let (al, au) = (iv.l.abs(), iv.u.abs());
    match latent_class(iv) {
        LatentClass::Plus => WeightedLabel { w: au, e: -1.0, latent: LatentClass::Plus },
        LatentClass::Minus => WeightedLabel { w: al, e: 1.0, latent: LatentClass::Minus },
        LatentClass::Unlabeled => {
            WeightedLabel { w: (au - al).abs(), e: -sgn(au - al), latent: LatentClass::Unlabeled }
        }
    }
}

/// Bayes score: its sign is the interval-optimal decision, its magnitude the excess-risk weight.
pub fn eta(iv: &Interval) -> f64 {
    match latent_class(iv) {
        LatentClass::Plus => iv.u.abs(),
        LatentClass::Minus => -iv.l.abs(),
        LatentClass::Unlabeled => iv.u.abs() - iv.l.abs(),
    }
}

pub fn bayes_sign(iv: &Interval) -> f64 {
    SgnConvention::bayes(eta(iv))
}

/// Worst-case weighted misclassification loss of deciding `sign` on this interval.
pub fn sup_loss(iv: &Interval, sign: f64) -> f64 {
    let (al, au) = (iv.l.abs(), iv.u.abs());
    let wrong_if_plus = if sign != 1.0 { au } else { 0.0 };
    let wrong_if_minus = if sign != -1.0 { al } else { 0.0 };
    match latent_class(iv) {
        LatentClass::Plus => wrong_if_plus,
        LatentClass::Minus => wrong_if_minus,
        LatentClass::Unlabeled => wrong_if_plus.max(wrong_if_minus),
    }
}

/// Convex surrogate of [`sup_loss`] for a real-valued decision `f`.
pub fn surrogate_loss(iv: &Interval, f: f64) -> f64 {
    let (al, au) = (iv.l.abs(), iv.u.abs());
    let hinge = |t: f64| t.max(0.0);
    match latent_class(iv) {
        LatentClass::Plus => au * hinge(1.0 - f),
        LatentClass::Minus => al * hinge(1.0 + f),
        LatentClass::Unlabeled if au >= al => al + (au - al) * hinge(1.0 - f),
        LatentClass::Unlabeled => au + (al - au) * hinge(1.0 + f),
    }
}

/// The part of the surrogate that does not depend on `f`.
pub fn surrogate_constant(iv: &Interval) -> f64 {
    if latent_class(iv) == LatentClass::Unlabeled {
        iv.l.abs().min(iv.u.abs())
    } else {
        0.0
    }
}
