use rand::Rng;
use rand_distr::StandardNormal;

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `v / |v|`, or the zero vector when `v` has no length.
pub fn normalized(v: &[f64]) -> Vec<f64> {
    let n = norm(v);
    if n > 0.0 {
        v.iter().map(|x| x / n).collect()
    } else {
        vec![0.0; v.len()]
    }
}

/// Cosine similarity; zero if either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

pub fn gaussian_vec<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn random_unit<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v = gaussian_vec(rng, dim);
        if norm(&v) > 1e-9 {
            return normalized(&v);
        }
    }
}

/// A unit vector whose cosine with the unit vector `base` is exactly
/// `similarity` (up to rounding).
pub fn with_similarity<R: Rng>(rng: &mut R, base: &[f64], similarity: f64) -> Vec<f64> {
    let s = similarity.clamp(-1.0, 1.0);
    if base.len() < 2 {
        return base.to_vec();
    }
    let orth = loop {
        let r = gaussian_vec(rng, base.len());
        let d: f64 = r.iter().zip(base).map(|(x, y)| x * y).sum();
        let o: Vec<f64> = r.iter().zip(base).map(|(x, y)| x - d * y).collect();
        if norm(&o) > 1e-9 {
            break normalized(&o);
        }
    };
    let c = (1.0 - s * s).max(0.0).sqrt();
    normalized(&base.iter().zip(&orth).map(|(b, o)| s * b + c * o).collect::<Vec<_>>())
}

/// One step of a random walk on the unit sphere.
pub fn drift_step<R: Rng>(rng: &mut R, v: &[f64], step: f64) -> Vec<f64> {
    if step == 0.0 {
        return v.to_vec();
    }
    let g = gaussian_vec(rng, v.len());
    let moved: Vec<f64> = v.iter().zip(&g).map(|(a, b)| a + step * b).collect();
    if norm(&moved) > 0.0 {
        normalized(&moved)
    } else {
        v.to_vec()
    }
}

/// Appearance seen through an occluder: own appearance mixed with the
/// occluder's in proportion to severity. Static occluders have none.
pub fn mix(own: &[f64], occluder: Option<&[f64]>, severity: f64) -> Vec<f64> {
    let v: Vec<f64> = match occluder {
        Some(o) => own.iter().zip(o).map(|(a, b)| (1.0 - severity) * a + severity * b).collect(),
        None => own.iter().map(|a| (1.0 - severity) * a).collect(),
    };
    normalized(&v)
}
