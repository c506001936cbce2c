const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval (95%) for `successes` out of `trials`.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Largest k whose success rate is at least one half. `points` are
/// `(k, rate)` pairs in any order.
pub fn max_k_50(points: &[(usize, f64)]) -> Option<usize> {
    points.iter().filter(|(_, r)| *r >= 0.5).map(|(k, _)| *k).max()
}

/// Largest k such that every k up to it succeeded in every trial.
pub fn max_k_first_failure(points: &[(usize, f64)]) -> Option<usize> {
    let mut sorted = points.to_vec();
    sorted.sort_by_key(|p| p.0);
    sorted.iter().take_while(|(_, r)| *r >= 1.0).map(|(k, _)| *k).last()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_known_values() {
        // 10/20: centre 0.5, interval about (0.2993, 0.7007).
        let (lo, hi) = wilson_interval(10, 20);
        assert!((lo - 0.299_298).abs() < 1e-5, "{lo}");
        assert!((hi - 0.700_702).abs() < 1e-5, "{hi}");
        let (lo, hi) = wilson_interval(20, 20);
        assert!(hi == 1.0 && (lo - 0.838_875).abs() < 1e-5, "{lo}");
        let (lo, hi) = wilson_interval(0, 5);
        assert!(lo == 0.0 && hi > 0.4 && hi < 0.5);
    }

    #[test]
    fn max_k_definitions() {
        let pts = [(1, 1.0), (2, 1.0), (3, 0.9), (4, 1.0), (5, 0.5), (6, 0.2)];
        assert_eq!(max_k_50(&pts), Some(5));
        assert_eq!(max_k_first_failure(&pts), Some(2));
        assert_eq!(max_k_first_failure(&[(1, 0.95)]), None);
        assert_eq!(max_k_50(&[(3, 0.4)]), None);
    }
}
