use crate::model::Observation;

/// Consistency constant `1 / Phi^{-1}(0.75)` for Gaussian noise.
pub const MAD_SCALE: f64 = 1.4826;

/// Lower-middle order statistic (`(p-1)/2`-th smallest, 0-based).
fn lower_median(values: &mut [f64]) -> f64 {
    let mid = (values.len() - 1) / 2;
    *values.select_nth_unstable_by(mid, f64::total_cmp).1
}

/// Robust noise scale `1.4826 * median |X_ij - median(X)|`, using the
/// lower-middle element for even counts.
pub fn mad_sigma(x: &Observation) -> f64 {
    mad_of(x.as_slice())
}

pub fn mad_of(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut buf = values.to_vec();
    let med = lower_median(&mut buf);
    for (b, v) in buf.iter_mut().zip(values) {
        *b = (v - med).abs();
    }
    MAD_SCALE * lower_median(&mut buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_instance, NoiseSpec, PlantedSignal};
    use ndarray::{array, Array2};

    #[test]
    fn constant_matrix_has_zero_scale() {
        let x = Observation::new(Array2::from_elem((3, 4), 2.5)).unwrap();
        assert_eq!(mad_sigma(&x), 0.0);
    }

    #[test]
    fn lower_middle_convention() {
        let x = Observation::new(array![[1.0, 2.0], [3.0, 100.0]]).unwrap();
        assert_eq!(mad_sigma(&x), 1.4826);
    }

    #[test]
    fn consistent_for_standard_gaussian() {
        let s = PlantedSignal::empty(1000, 1000).unwrap();
        let (x, _) = generate_instance(&s, &NoiseSpec::gaussian(1.0), 11).unwrap();
        let est = mad_sigma(&x);
        assert!((0.97..=1.03).contains(&est), "{est}");
    }
}
