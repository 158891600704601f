//! Confluent divided differences over grouped nodes.

use num_complex::Complex64;

/// Groups numerically coincident nodes: points closer than `tol` (transitively)
/// form one group, represented by their mean. Groups are returned in order of
/// first appearance with their multiplicities.
pub fn cluster_nodes(points: &[Complex64], tol: f64) -> Vec<(Complex64, usize)> {
    let n = points.len();
    let mut group: Vec<usize> = (0..n).collect();
    fn root(group: &mut [usize], mut i: usize) -> usize {
        while group[i] != i {
            group[i] = group[group[i]];
            i = group[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (points[i] - points[j]).norm() <= tol {
                let (a, b) = (root(&mut group, i), root(&mut group, j));
                if a != b {
                    group[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut order: Vec<usize> = Vec::new();
    let mut sums: Vec<(Complex64, usize)> = Vec::new();
    for i in 0..n {
        let r = root(&mut group, i);
        match order.iter().position(|&o| o == r) {
            Some(k) => {
                sums[k].0 += points[i];
                sums[k].1 += 1;
            }
            None => {
                order.push(r);
                sums.push((points[i], 1));
            }
        }
    }
    sums.into_iter()
        .map(|(s, c)| {
            if c == 1 {
                (s, 1)
            } else {
                (s / c as f64, c)
            }
        })
        .collect()
}

/// `f[x₀, …, xₙ]` over grouped nodes `(z_g, μ_g)` (each `z_g` repeated `μ_g`
/// times), by the Newton table with the confluent closure
/// `f[z, …, z] (m + 1 copies) = f⁽ᵐ⁾(z) / m!`.
///
/// `taylor(z, m)` must return `f⁽ᵐ⁾(z) / m!`; it is only called for `m < μ_g`.
pub fn confluent_divided_difference<E>(
    groups: &[(Complex64, usize)],
    mut taylor: impl FnMut(Complex64, usize) -> Result<Complex64, E>,
) -> Result<Complex64, E> {
    let mut xs = Vec::new();
    let mut gid = Vec::new();
    let mut coeffs: Vec<Vec<Complex64>> = Vec::with_capacity(groups.len());
    for (g, &(z, mult)) in groups.iter().enumerate() {
        let mut c = Vec::with_capacity(mult);
        for m in 0..mult {
            c.push(taylor(z, m)?);
        }
        coeffs.push(c);
        for _ in 0..mult {
            xs.push(z);
            gid.push(g);
        }
    }
    let n = xs.len();
    if n == 0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    // column[i] holds f[x_i, …, x_{i+width}]
    let mut column: Vec<Complex64> = gid.iter().map(|&g| coeffs[g][0]).collect();
    for width in 1..n {
        let mut next = Vec::with_capacity(n - width);
        for i in 0..(n - width) {
            let j = i + width;
            if gid[i] == gid[j] {
                next.push(coeffs[gid[i]][width]);
            } else {
                next.push((column[i + 1] - column[i]) / (xs[j] - xs[i]));
            }
        }
        column = next;
    }
    Ok(column[0])
}
