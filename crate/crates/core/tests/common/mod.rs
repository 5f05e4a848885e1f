#![allow(dead_code)]

/// Closed half-space count by brute force: directions orthogonal to every
/// query-to-point segment, rotated by ±1e-9 rad, plus the segment directions.
pub fn brute_force_count(q: (f64, f64), pts: &[(f64, f64)]) -> usize {
    let mut angles = Vec::new();
    for &(x, y) in pts {
        let (dx, dy) = (x - q.0, y - q.1);
        if dx == 0.0 && dy == 0.0 {
            continue;
        }
        let th = dy.atan2(dx);
        angles.push(th);
        for perp in [th + std::f64::consts::FRAC_PI_2, th - std::f64::consts::FRAC_PI_2] {
            angles.push(perp + 1e-9);
            angles.push(perp - 1e-9);
        }
    }
    if angles.is_empty() {
        return pts.len();
    }
    angles
        .iter()
        .map(|&a| {
            let u = (a.cos(), a.sin());
            pts.iter()
                .filter(|&&(x, y)| u.0 * (x - q.0) + u.1 * (y - q.1) >= 0.0)
                .count()
        })
        .min()
        .unwrap()
}
