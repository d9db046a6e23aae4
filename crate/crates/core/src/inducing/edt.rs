//! Exact squared Euclidean distance transform (lower envelope of parabolas).

const INF: f64 = 1e20;

fn transform_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = -INF;
    z[1] = INF;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                // k == 0 and the new parabola dominates
                v[0] = q;
                z[0] = -INF;
                z[1] = INF;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = INF;
            }
            break;
        }
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Squared distance, in cell units, from each cell to the nearest source
/// cell of an `m^dim` grid (row-major). `INF`-like values when there is no
/// source.
pub fn squared_distance(mask: &[bool], m: usize, dim: usize) -> Vec<f64> {
    let mut d: Vec<f64> = mask.iter().map(|&s| if s { 0.0 } else { INF }).collect();
    let mut v = vec![0usize; m];
    let mut z = vec![0.0; m + 1];
    let mut line = vec![0.0; m];
    let mut out = vec![0.0; m];
    if dim == 1 {
        transform_1d(&d.clone(), &mut d, &mut v, &mut z);
        return d;
    }
    for i in 0..m {
        let row = &mut d[i * m..(i + 1) * m];
        line.copy_from_slice(row);
        transform_1d(&line, row, &mut v, &mut z);
    }
    for j in 0..m {
        for i in 0..m {
            line[i] = d[i * m + j];
        }
        transform_1d(&line, &mut out, &mut v, &mut z);
        for i in 0..m {
            d[i * m + j] = out[i];
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_brute_force() {
        let m = 23;
        let mask: Vec<bool> = (0..m * m).map(|k| (k * 7919) % 97 == 3).collect();
        let d = squared_distance(&mask, m, 2);
        for a in 0..m * m {
            let (ai, aj) = ((a / m) as f64, (a % m) as f64);
            let brute = (0..m * m)
                .filter(|&b| mask[b])
                .map(|b| {
                    let (bi, bj) = ((b / m) as f64, (b % m) as f64);
                    (ai - bi).powi(2) + (aj - bj).powi(2)
                })
                .fold(INF, f64::min);
            assert_eq!(d[a], brute);
        }
    }

    #[test]
    fn one_dimensional() {
        let mask = [false, false, true, false, false, false, true];
        assert_eq!(squared_distance(&mask, 7, 1), vec![4.0, 1.0, 0.0, 1.0, 4.0, 1.0, 0.0]);
    }
}
