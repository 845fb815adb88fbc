use rayon::prelude::*;

use crate::imaging::Plane;

/// Separable Gaussian blur, kernel truncated at 3σ, edges clamped.
pub fn gaussian_blur(plane: &Plane, sigma: f64) -> Plane {
    let (w, h) = plane.dims();
    if w == 0 || h == 0 || !(sigma > 0.0) {
        return plane.clone();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= sum);

    let mut horizontal = vec![0.0f32; w * h];
    horizontal.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, out) in row.iter_mut().enumerate() {
            let acc: f64 = kernel
                .iter()
                .enumerate()
                .map(|(k, wgt)| wgt * plane.get_clamped(x as isize + k as isize - radius, y as isize) as f64)
                .sum();
            *out = acc as f32;
        }
    });
    let horizontal = Plane::new(w, h, horizontal);
    Plane::par_from_fn(w, h, |x, y| {
        kernel
            .iter()
            .enumerate()
            .map(|(k, wgt)| wgt * horizontal.get_clamped(x as isize, y as isize + k as isize - radius) as f64)
            .sum::<f64>() as f32
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_stays_zero_and_mass_is_local() {
        let zero = Plane::filled(9, 9, 0.0);
        assert_eq!(gaussian_blur(&zero, 2.0), zero);
        let mut impulse = Plane::filled(21, 21, 0.0);
        impulse.set(10, 10, 1.0);
        let b = gaussian_blur(&impulse, 1.5);
        let total: f32 = b.data().iter().sum();
        assert!((total - 1.0).abs() < 1e-5);
        // Truncated at ceil(3 * 1.5) = 5 pixels.
        assert_eq!(b.get(16, 10), 0.0);
        assert!(b.get(15, 10) > 0.0);
    }
}
