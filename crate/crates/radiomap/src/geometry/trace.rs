use super::{GridSpec, Link, Point2, Profile};
use crate::{Error, Result};

/// One cell touched by a link's ground segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracedCell {
    pub row: usize,
    pub col: usize,
    pub index: usize,
    /// Ground center of the cell.
    pub center: Point2,
    /// Profile distance from the TX (projection of the center, kept inside the segment).
    pub distance: f64,
    /// Line altitude above `distance`.
    pub altitude: f64,
}

/// Supercover of a link's ground segment, ordered from TX toward RX.
#[derive(Debug, Clone)]
pub struct CellTrace {
    pub cells: Vec<TracedCell>,
    pub(crate) profile: Profile,
}

impl CellTrace {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn ground_distance(&self) -> f64 {
        self.profile.d0
    }

    pub fn iter(&self) -> impl Iterator<Item = &TracedCell> {
        self.cells.iter()
    }
}

/// Every grid cell whose closed square touches the ground segment TX→RX.
///
/// The segment is split at each crossing of a grid line; each breakpoint and
/// each interval midpoint contributes the closed cells containing it, which
/// yields corner-adjacent cells when the segment passes exactly through a
/// grid vertex.
pub fn trace_cells(link: &Link, grid: &GridSpec) -> Result<CellTrace> {
    link.validate()?;
    let a = grid.to_grid(link.tx.ground());
    let b = grid.to_grid(link.rx.ground());
    let (rows, cols) = (grid.rows as f64, grid.cols as f64);
    let (dx, dy) = (b.x - a.x, b.y - a.y);

    let (t0, t1) = clip_unit_segment(a, b, rows, cols).ok_or(Error::EmptyTrace)?;

    // Breakpoints carry snapped coordinates where they sit on a grid line.
    let mut bps: Vec<(f64, Option<f64>, Option<f64>)> = vec![(t0, None, None), (t1, None, None)];
    push_line_crossings(&mut bps, a.x, dx, t0, t1, true);
    push_line_crossings(&mut bps, a.y, dy, t0, t1, false);
    bps.sort_by(|p, q| p.0.total_cmp(&q.0));

    let mut merged: Vec<(f64, Option<f64>, Option<f64>)> = Vec::with_capacity(bps.len());
    for bp in bps {
        match merged.last_mut() {
            Some(last) if bp.0 - last.0 <= 1e-12 => {
                last.1 = last.1.or(bp.1);
                last.2 = last.2.or(bp.2);
            }
            _ => merged.push(bp),
        }
    }

    let at = |t: f64| {
        Point2::new(
            (a.x + t * dx).clamp(0.0, rows),
            (a.y + t * dy).clamp(0.0, cols),
        )
    };

    let mut hits: Vec<(usize, f64)> = Vec::with_capacity(4 * merged.len());
    for (k, &(t, sx, sy)) in merged.iter().enumerate() {
        let p = at(t);
        let p = Point2::new(sx.unwrap_or(p.x), sy.unwrap_or(p.y));
        closed_cells(p, grid, |idx| hits.push((idx, t)));
        if let Some(&(tn, _, _)) = merged.get(k + 1) {
            let tm = 0.5 * (t + tn);
            closed_cells(at(tm), grid, |idx| hits.push((idx, t)));
        }
    }

    hits.sort_by(|p, q| p.0.cmp(&q.0).then(p.1.total_cmp(&q.1)));
    hits.dedup_by_key(|h| h.0);

    let profile = Profile::new(link, grid);
    let mut keyed: Vec<(f64, f64, TracedCell)> = hits
        .into_iter()
        .map(|(index, entry)| {
            let (row, col) = grid.row_col(index);
            let center = grid.cell_center(row, col);
            let proj = profile.project(center);
            let distance = profile.clamp(proj);
            let cell = TracedCell {
                row,
                col,
                index,
                center,
                distance,
                altitude: link.altitude_at(distance),
            };
            (proj, entry, cell)
        })
        .collect();
    keyed.sort_by(|p, q| {
        p.0.total_cmp(&q.0)
            .then(p.1.total_cmp(&q.1))
            .then(p.2.index.cmp(&q.2.index))
    });

    Ok(CellTrace {
        cells: keyed.into_iter().map(|k| k.2).collect(),
        profile,
    })
}

/// Parameter interval of `a + t(b − a)`, `t ∈ [0,1]`, inside `[0,w]×[0,h]`.
fn clip_unit_segment(a: Point2, b: Point2, w: f64, h: f64) -> Option<(f64, f64)> {
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for (p, q) in [
        (-(b.x - a.x), a.x),
        (b.x - a.x, w - a.x),
        (-(b.y - a.y), a.y),
        (b.y - a.y, h - a.y),
    ] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    (t0 <= t1).then_some((t0, t1))
}

fn push_line_crossings(
    out: &mut Vec<(f64, Option<f64>, Option<f64>)>,
    start: f64,
    delta: f64,
    t0: f64,
    t1: f64,
    is_x: bool,
) {
    if delta == 0.0 {
        return;
    }
    let (u0, u1) = (start + t0 * delta, start + t1 * delta);
    let (lo, hi) = if u0 <= u1 { (u0, u1) } else { (u1, u0) };
    let mut k = lo.ceil();
    while k <= hi {
        let t = ((k - start) / delta).clamp(t0, t1);
        out.push(if is_x { (t, Some(k), None) } else { (t, None, Some(k)) });
        k += 1.0;
    }
}

/// Calls `f` with every cell whose closed square contains grid point `p`.
fn closed_cells(p: Point2, grid: &GridSpec, mut f: impl FnMut(usize)) {
    // A coordinate on a grid line belongs to the cells on both sides.
    let span = |v: f64, n: usize| -> (isize, isize) {
        let fl = v.floor();
        let lo = if v == fl { fl as isize - 1 } else { fl as isize };
        (lo.max(0), (fl as isize).min(n as isize - 1))
    };
    let (r0, r1) = span(p.x, grid.rows);
    let (c0, c1) = span(p.y, grid.cols);
    for r in r0..=r1 {
        for c in c0..=c1 {
            f(grid.index(r as usize, c as usize));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn grid(n: usize, m: usize) -> GridSpec {
        GridSpec::new(n, m, 1.0, Point2::new(0.0, 0.0)).unwrap()
    }

    fn link(ax: f64, ay: f64, bx: f64, by: f64) -> Link {
        Link::new(Point3::new(ax, ay, 10.0), Point3::new(bx, by, 2.0)).unwrap()
    }

    /// Exhaustive closed-square versus segment intersection.
    fn oracle(l: &Link, g: &GridSpec) -> BTreeSet<usize> {
        let a = g.to_grid(l.tx.ground());
        let b = g.to_grid(l.rx.ground());
        let mut out = BTreeSet::new();
        for r in 0..g.rows {
            for c in 0..g.cols {
                let (x0, x1, y0, y1) = (r as f64, r as f64 + 1.0, c as f64, c as f64 + 1.0);
                let (mut lo, mut hi) = (0.0f64, 1.0f64);
                let mut ok = true;
                for (p, q) in [
                    (-(b.x - a.x), a.x - x0),
                    (b.x - a.x, x1 - a.x),
                    (-(b.y - a.y), a.y - y0),
                    (b.y - a.y, y1 - a.y),
                ] {
                    if p == 0.0 {
                        ok &= q >= 0.0;
                    } else if p < 0.0 {
                        lo = lo.max(q / p);
                    } else {
                        hi = hi.min(q / p);
                    }
                }
                if ok && lo <= hi {
                    out.insert(g.index(r, c));
                }
            }
        }
        out
    }

    #[test]
    fn axis_aligned_segment_spans_five_cells_in_order() {
        let g = grid(8, 8);
        let t = trace_cells(&link(1.5, 3.5, 5.5, 3.5), &g).unwrap();
        let rows: Vec<_> = t.iter().map(|c| (c.row, c.col)).collect();
        assert_eq!(rows, vec![(1, 3), (2, 3), (3, 3), (4, 3), (5, 3)]);
        let rev = trace_cells(&link(5.5, 3.5, 1.5, 3.5), &g).unwrap();
        let rows: Vec<_> = rev.iter().map(|c| c.row).collect();
        assert_eq!(rows, vec![5, 4, 3, 2, 1]);
    }

    #[test]
    fn diagonal_through_corners_includes_corner_neighbours() {
        let g = grid(4, 4);
        let l = link(0.5, 0.5, 3.5, 3.5);
        let got: BTreeSet<_> = trace_cells(&l, &g).unwrap().iter().map(|c| c.index).collect();
        assert!(got.contains(&g.index(0, 1)) && got.contains(&g.index(1, 0)));
        assert_eq!(got, oracle(&l, &g));
        assert_eq!(got.len(), 10);
    }

    #[test]
    fn segment_on_grid_line_takes_both_sides() {
        let g = grid(4, 4);
        let l = link(0.5, 2.0, 3.5, 2.0);
        let got: BTreeSet<_> = trace_cells(&l, &g).unwrap().iter().map(|c| c.index).collect();
        assert_eq!(got, oracle(&l, &g));
        assert_eq!(got.len(), 8);
    }

    #[test]
    fn altitude_uses_projected_center() {
        let g = GridSpec::new(1, 60, 1.0, Point2::new(-0.5, -0.5)).unwrap();
        let l = Link::new(Point3::new(0.0, 0.0, 100.0), Point3::new(0.0, 60.0, 20.0)).unwrap();
        let t = trace_cells(&l, &g).unwrap();
        let mid = t.iter().find(|c| c.col == 30).unwrap();
        assert_eq!(mid.distance, 30.0);
        assert_eq!(mid.altitude, 60.0);
    }

    #[test]
    fn outside_grid_is_an_error() {
        let g = grid(4, 4);
        assert_eq!(trace_cells(&link(-5.0, -5.0, -1.0, 10.0), &g).unwrap_err(), Error::EmptyTrace);
    }

    #[test]
    fn partially_outside_is_clipped() {
        let g = grid(4, 4);
        let l = link(-3.0, 1.5, 9.0, 1.5);
        let t = trace_cells(&l, &g).unwrap();
        assert_eq!(t.len(), 4);
        let got: BTreeSet<_> = t.iter().map(|c| c.index).collect();
        assert_eq!(got, oracle(&l, &g));
    }

    #[test]
    fn random_segments_match_exhaustive_intersection() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let g = GridSpec::new(16, 16, 2.5, Point2::new(-3.0, 1.0)).unwrap();
        for i in 0..10_000 {
            let mut p = || {
                if i % 5 == 0 {
                    // lattice points exercise corner crossings
                    -3.0 + 2.5 * rng.random_range(0..17) as f64
                } else {
                    rng.random_range(-8.0..40.0)
                }
            };
            let (ax, ay, bx, by) = (p(), p() + 4.0, p(), p() + 4.0);
            let Ok(l) = Link::new(Point3::new(ax, ay, 5.0), Point3::new(bx, by, 1.0)) else {
                continue;
            };
            let want = oracle(&l, &g);
            match trace_cells(&l, &g) {
                Ok(t) => {
                    let got: BTreeSet<_> = t.iter().map(|c| c.index).collect();
                    assert_eq!(got.len(), t.len());
                    assert_eq!(got, want, "segment {ax},{ay} -> {bx},{by}");
                }
                Err(e) => {
                    assert_eq!(e, Error::EmptyTrace);
                    assert!(want.is_empty());
                }
            }
        }
    }

    proptest! {
        #[test]
        fn trace_is_ordered_and_connected(
            ax in 0.0f64..16.0, ay in 0.0f64..16.0, bx in 0.0f64..16.0, by in 0.0f64..16.0,
        ) {
            prop_assume!((ax - bx).hypot(ay - by) > 1e-6);
            let g = grid(16, 16);
            let l = link(ax, ay, bx, by);
            let t = trace_cells(&l, &g).unwrap();
            let prof = Profile::new(&l, &g);
            for w in t.cells.windows(2) {
                prop_assert!(prof.project(w[0].center) <= prof.project(w[1].center));
            }
            // 8-connected: flood fill from the first cell reaches every cell
            let cells: Vec<(isize, isize)> =
                t.iter().map(|c| (c.row as isize, c.col as isize)).collect();
            let mut seen = vec![false; cells.len()];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(i) = stack.pop() {
                for j in 0..cells.len() {
                    let near = (cells[i].0 - cells[j].0).abs() <= 1 && (cells[i].1 - cells[j].1).abs() <= 1;
                    if !seen[j] && near {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            prop_assert!(seen.iter().all(|s| *s));
            for c in t.iter() {
                prop_assert!(c.altitude <= 10.0 && c.altitude >= 2.0);
            }
        }
    }
}
