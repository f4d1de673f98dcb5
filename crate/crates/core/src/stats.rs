//! Mean and quartiles with linear interpolation between order statistics.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantiles {
    pub mean: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Option<Quantiles> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Some(Quantiles {
            mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
            q25: quantile_sorted(&sorted, 0.25),
            q50: quantile_sorted(&sorted, 0.5),
            q75: quantile_sorted(&sorted, 0.75),
        })
    }
}

/// Quantile of presorted data, interpolating at position `p (n - 1)`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_value() {
        let q = Quantiles::of(&[0.3]).unwrap();
        assert_eq!((q.mean, q.q25, q.q50, q.q75), (0.3, 0.3, 0.3, 0.3));
    }

    #[test]
    fn two_values() {
        let q = Quantiles::of(&[0.6, 0.4]).unwrap();
        assert!((q.mean - 0.5).abs() < 1e-15);
        assert!((q.q50 - 0.5).abs() < 1e-15);
        assert!((q.q25 - 0.45).abs() < 1e-15);
    }

    #[test]
    fn ordering_holds() {
        let q = Quantiles::of(&[5.0, 1.0, 3.0, 2.0, 4.0]).unwrap();
        assert_eq!((q.q25, q.q50, q.q75), (2.0, 3.0, 4.0));
        assert!(Quantiles::of(&[]).is_none());
    }
}
