//! Position-ordered list of retired buffer descriptors awaiting release.

use std::collections::VecDeque;

/// A retired record and the bookkeeping that decides when it may go.
#[derive(Debug)]
pub(crate) struct Retired<R> {
    pub(crate) position: u64,
    /// Epoch at which the record became unreachable for new traversals.
    /// `None` while the record may still be published as the queue tail.
    pub(crate) stamp: Option<u64>,
    pub(crate) record: R,
}

/// Consumer-owned list, kept sorted by buffer position.
#[derive(Debug)]
pub(crate) struct GarbageList<R> {
    entries: VecDeque<Retired<R>>,
}

impl<R> Default for GarbageList<R> {
    fn default() -> Self {
        GarbageList { entries: VecDeque::new() }
    }
}

impl<R> GarbageList<R> {
    /// Adds a record. Records usually arrive in position order; a fold behind
    /// an earlier fold is inserted in place.
    pub(crate) fn retire(&mut self, position: u64, stamp: Option<u64>, record: R) {
        let at = match self.entries.back() {
            Some(last) if last.position > position => {
                self.entries.partition_point(|e| e.position < position)
            }
            _ => self.entries.len(),
        };
        debug_assert!(
            self.entries.get(at).map_or(true, |e| e.position != position),
            "position {position} retired twice"
        );
        self.entries.insert(at, Retired { position, stamp, record });
    }

    /// Releases every record with `position < boundary` for which `ready`
    /// returns true, handing it to `release`. Returns the number released.
    pub(crate) fn sweep(
        &mut self,
        boundary: u64,
        mut ready: impl FnMut(&mut Retired<R>) -> bool,
        mut release: impl FnMut(R),
    ) -> usize {
        let end = self.entries.partition_point(|e| e.position < boundary);
        let mut kept = VecDeque::new();
        let mut released = 0;
        for mut e in self.entries.drain(..end) {
            if ready(&mut e) {
                release(e.record);
                released += 1;
            } else {
                kept.push_back(e);
            }
        }
        kept.extend(self.entries.drain(..));
        self.entries = kept;
        released
    }

    pub(crate) fn drain_all(&mut self, mut release: impl FnMut(R)) {
        for e in self.entries.drain(..) {
            release(e.record);
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.entries.len()
    }

    #[cfg(test)]
    pub(crate) fn positions(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.position).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn list(positions: &[u64]) -> GarbageList<u64> {
        let mut g = GarbageList::default();
        for &p in positions {
            g.retire(p, Some(0), p);
        }
        g
    }

    #[test]
    fn retire_appends_in_order() {
        let g = list(&[3, 7]);
        assert_eq!(g.positions(), vec![3, 7]);
    }

    #[test]
    fn sweep_releases_prefix_below_boundary() {
        let mut g = list(&[3, 7]);
        let mut out = Vec::new();
        assert_eq!(g.sweep(5, |_| true, |r| out.push(r)), 1);
        assert_eq!(out, vec![3]);
        assert_eq!(g.positions(), vec![7]);
    }

    #[test]
    fn sweep_of_empty_list_is_zero() {
        let mut g: GarbageList<u64> = GarbageList::default();
        assert_eq!(g.sweep(100, |_| true, |_| {}), 0);
    }

    #[test]
    fn sweep_releases_all_below_high_boundary() {
        let mut g = list(&[3, 4]);
        assert_eq!(g.sweep(10, |_| true, |_| {}), 2);
        assert_eq!(g.len(), 0);
    }

    #[test]
    fn sweep_keeps_records_that_are_not_ready() {
        let mut g = list(&[2, 3, 4]);
        let n = g.sweep(10, |e| e.position != 3, |_| {});
        assert_eq!(n, 2);
        assert_eq!(g.positions(), vec![3]);
    }

    #[test]
    fn out_of_order_retire_is_inserted_in_place() {
        // Folding behind a stalled slot can retire a lower position after a
        // higher one.
        let g = list(&[3, 6, 4]);
        assert_eq!(g.positions(), vec![3, 4, 6]);
    }

    proptest! {
        #[test]
        fn sweep_matches_filter_model(
            mut positions in proptest::collection::btree_set(1u64..200, 0..40),
            boundary in 0u64..220,
        ) {
            let ordered: Vec<u64> = std::mem::take(&mut positions).into_iter().collect();
            let mut shuffled = ordered.clone();
            shuffled.reverse();
            let mut g = list(&shuffled);
            prop_assert_eq!(g.positions(), ordered.clone());
            let mut out = Vec::new();
            g.sweep(boundary, |_| true, |r| out.push(r));
            let expect_out: Vec<u64> = ordered.iter().copied().filter(|&p| p < boundary).collect();
            let expect_kept: Vec<u64> = ordered.iter().copied().filter(|&p| p >= boundary).collect();
            prop_assert_eq!(out, expect_out);
            prop_assert_eq!(g.positions(), expect_kept);
        }
    }
}
