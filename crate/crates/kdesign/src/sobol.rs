//! Unscrambled Sobol' points in Gray-code order, with the Joe and Kuo
//! (new-joe-kuo-6) direction numbers for the first 1111 dimensions.

use crate::error::{Error, Result};
use crate::points::PointSet;

const TABLE: &str = include_str!("data/joe_kuo_1111.txt");
const BITS: usize = 32;

/// Highest supported dimension. The table has one row per dimension from 2
/// on, after a header line, so the line count is the answer.
pub fn max_dim() -> usize {
    TABLE.lines().count()
}

/// Direction numbers `v_1..v_32` for one coordinate (1-based dimension).
fn directions(dim: usize) -> Result<[u32; BITS]> {
    let mut v = [0u32; BITS];
    if dim == 1 {
        for (k, vk) in v.iter_mut().enumerate() {
            *vk = 1u32 << (BITS - 1 - k);
        }
        return Ok(v);
    }
    let line = TABLE
        .lines()
        .skip(1)
        .nth(dim - 2)
        .ok_or_else(|| Error::Unsupported(format!("Sobol dimension {dim} (table holds {})", max_dim())))?;
    let nums: Vec<u64> = line
        .split_whitespace()
        .map(|t| t.parse::<u64>().map_err(|e| Error::Parse(format!("direction table: {e}"))))
        .collect::<Result<_>>()?;
    let (s, a) = (nums[1] as usize, nums[2]);
    let m = &nums[3..];
    if m.len() != s {
        return Err(Error::Parse(format!("direction table row for dimension {dim}")));
    }
    for k in 0..s.min(BITS) {
        v[k] = (m[k] as u32) << (BITS - 1 - k);
    }
    for k in s..BITS {
        let mut x = v[k - s] ^ (v[k - s] >> s);
        for l in 1..s {
            if (a >> (s - 1 - l)) & 1 == 1 {
                x ^= v[k - l];
            }
        }
        v[k] = x;
    }
    Ok(v)
}

/// Points `skip..skip+m` of the `d`-dimensional sequence. The first point
/// (index 0) is the origin.
pub fn sobol(d: usize, m: usize, skip: usize) -> Result<PointSet> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    if d > max_dim() {
        return Err(Error::Unsupported(format!("Sobol dimension {d} (table holds {})", max_dim())));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("number of points must be positive".into()));
    }
    if (skip + m) as u64 > 1u64 << BITS {
        return Err(Error::InvalidParameter("too many Sobol points".into()));
    }
    let dirs: Vec<[u32; BITS]> = (1..=d).map(directions).collect::<Result<_>>()?;
    let scale = 1.0 / (1u64 << BITS) as f64;
    let mut state = vec![0u32; d];
    let mut out = PointSet::with_capacity(d, m);
    let mut row = vec![0.0; d];
    for i in 0..skip + m {
        if i > 0 {
            // bit that flips between Gray codes of i-1 and i
            let c = (!(i - 1)).trailing_zeros() as usize;
            for (s, v) in state.iter_mut().zip(&dirs) {
                *s ^= v[c];
            }
        }
        if i >= skip {
            for (r, s) in row.iter_mut().zip(&state) {
                *r = *s as f64 * scale;
            }
            out.push(&row)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_points_one_dim() {
        assert_eq!(sobol(1, 4, 0).unwrap().as_flat(), &[0.0, 0.5, 0.75, 0.25]);
    }

    #[test]
    fn origin_first() {
        assert_eq!(sobol(2, 1, 0).unwrap().as_flat(), &[0.0, 0.0]);
    }

    #[test]
    fn known_two_dim_prefix() {
        let s = sobol(2, 8, 0).unwrap();
        let want = [[0.0, 0.0], [0.5, 0.5], [0.75, 0.25], [0.25, 0.75], [0.375, 0.375], [0.875, 0.875], [0.625, 0.125], [0.125, 0.625]];
        for (r, w) in s.rows().zip(want) {
            assert_eq!(r, &w);
        }
    }

    #[test]
    fn higher_dimensions_match_reference() {
        let s = sobol(60, 40, 0).unwrap();
        let r = s.row(37);
        assert_eq!([r[2], r[7], r[49], r[59]], [0.578125, 0.796875, 0.953125, 0.296875]);
    }

    #[test]
    fn skip_matches_offset() {
        let a = sobol(5, 40, 0).unwrap();
        let b = sobol(5, 8, 32).unwrap();
        assert_eq!(&a.as_flat()[32 * 5..], b.as_flat());
    }

    #[test]
    fn stratified_in_every_dimension() {
        // each coordinate of the first 2^k points hits every dyadic cell once
        let d = 50;
        let s = sobol(d, 64, 0).unwrap();
        for j in 0..d {
            let mut cells = [false; 64];
            for r in s.rows() {
                cells[(r[j] * 64.0) as usize] = true;
            }
            assert!(cells.iter().all(|c| *c));
        }
        assert!(sobol(max_dim() + 1, 1, 0).is_err());
    }
}
