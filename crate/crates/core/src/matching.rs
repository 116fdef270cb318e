//! One-to-one correspondence between reference and estimated notes under
//! pitch/onset/offset tolerances.
//!
//! An estimated note may pair with a reference note only when every active
//! tolerance holds; among all admissible pairings the matcher returns one of
//! maximum cardinality, so true-positive counts never depend on note order.
//! Augmentation explores candidate partners in order of increasing onset
//! difference, which steers ties toward the closest pairs without affecting
//! the counts.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::fmath;
use crate::note::Note;

/// Matching tolerances. Defaults follow the common note-level evaluation
/// convention: onset within 50 ms, offset within the later of 50 ms or 20%
/// of the reference duration, exact pitch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Maximum |onset difference| in seconds.
    pub onset: f64,
    /// Floor of the offset tolerance in seconds.
    pub offset_min: f64,
    /// Offset tolerance as a fraction of the reference note duration.
    pub offset_ratio: f64,
    /// Maximum |pitch difference| in semitones (0 = exact MIDI pitch).
    pub pitch: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            onset: 0.050,
            offset_min: 0.050,
            offset_ratio: 0.20,
            pitch: 0.0,
        }
    }
}

impl Tolerances {
    /// Offset tolerance for a reference note: max(offset_min, offset_ratio x duration).
    pub fn offset_tolerance(&self, reference: &Note) -> f64 {
        let scaled = self.offset_ratio * reference.duration();
        if scaled > self.offset_min {
            scaled
        } else {
            self.offset_min
        }
    }
}

/// Maximum one-to-one pairing plus the counts derived from it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    /// Matched (reference index, estimated index) pairs, sorted by reference index.
    pub pairs: Vec<(usize, usize)>,
    /// Matched pairs.
    pub tp: usize,
    /// Unmatched estimated notes.
    pub fp: usize,
    /// Unmatched reference notes.
    pub fn_: usize,
}

fn onset_admissible(r: &Note, e: &Note, tol: &Tolerances) -> bool {
    fmath::abs(r.pitch as f64 - e.pitch as f64) <= tol.pitch
        && fmath::abs(r.onset - e.onset) <= tol.onset
}

fn collect_edges<F>(reference: &[Note], estimated: &[Note], admissible: F) -> Vec<(usize, usize)>
where
    F: Fn(&Note, &Note) -> bool,
{
    let mut edges = Vec::new();
    for (ri, r) in reference.iter().enumerate() {
        for (ei, e) in estimated.iter().enumerate() {
            if admissible(r, e) {
                edges.push((ri, ei));
            }
        }
    }
    edges
}

fn match_with<F>(reference: &[Note], estimated: &[Note], admissible: F) -> MatchResult
where
    F: Fn(&Note, &Note) -> bool,
{
    let mut edges = collect_edges(reference, estimated, admissible);
    // Closest onsets first so equal-cardinality ties resolve to near pairs.
    edges.sort_by(|&(ra, ea), &(rb, eb)| {
        let da = fmath::abs(reference[ra].onset - estimated[ea].onset);
        let db = fmath::abs(reference[rb].onset - estimated[eb].onset);
        da.total_cmp(&db)
            .then_with(|| ra.cmp(&rb))
            .then_with(|| ea.cmp(&eb))
    });
    let pairs = max_bipartite_matching(reference.len(), estimated.len(), &edges);
    let tp = pairs.len();
    MatchResult {
        tp,
        fp: estimated.len() - tp,
        fn_: reference.len() - tp,
        pairs,
    }
}

/// Matches on pitch and onset only.
pub fn match_onset(reference: &[Note], estimated: &[Note], tol: &Tolerances) -> MatchResult {
    match_with(reference, estimated, |r, e| onset_admissible(r, e, tol))
}

/// Matches on pitch, onset, and offset (offset within the later of the
/// fixed floor or the duration fraction).
pub fn match_onset_offset(reference: &[Note], estimated: &[Note], tol: &Tolerances) -> MatchResult {
    match_with(reference, estimated, |r, e| {
        onset_admissible(r, e, tol) && fmath::abs(r.offset - e.offset) <= tol.offset_tolerance(r)
    })
}

/// Maximum-cardinality bipartite matching over the given edges
/// (Hopcroft-Karp seeded by a greedy pass in edge order). Left/right sizes
/// bound the index ranges; out-of-range edges are ignored. Deterministic
/// for a fixed edge order: earlier edges claim free endpoints first, then
/// augmentation completes the matching to maximum cardinality.
pub fn max_bipartite_matching(
    left: usize,
    right: usize,
    edges: &[(usize, usize)],
) -> Vec<(usize, usize)> {
    const NONE: usize = usize::MAX;

    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); left];
    for &(l, r) in edges {
        if l < left && r < right {
            adjacency[l].push(r);
        }
    }

    let mut match_left = vec![NONE; left];
    let mut match_right = vec![NONE; right];
    for &(l, r) in edges {
        if l < left && r < right && match_left[l] == NONE && match_right[r] == NONE {
            match_left[l] = r;
            match_right[r] = l;
        }
    }
    let mut dist = vec![0usize; left];
    let mut queue = VecDeque::new();

    loop {
        // BFS layering from free left vertices.
        queue.clear();
        for l in 0..left {
            if match_left[l] == NONE {
                dist[l] = 0;
                queue.push_back(l);
            } else {
                dist[l] = NONE;
            }
        }
        let mut found_augmenting = false;
        while let Some(l) = queue.pop_front() {
            for &r in &adjacency[l] {
                match match_right[r] {
                    NONE => found_augmenting = true,
                    next => {
                        if dist[next] == NONE {
                            dist[next] = dist[l] + 1;
                            queue.push_back(next);
                        }
                    }
                }
            }
        }
        if !found_augmenting {
            break;
        }
        // DFS along the layering for a maximal set of disjoint augmenting paths.
        for l in 0..left {
            if match_left[l] == NONE {
                augment(l, &adjacency, &mut match_left, &mut match_right, &mut dist);
            }
        }
    }

    let mut pairs: Vec<(usize, usize)> = match_left
        .iter()
        .enumerate()
        .filter(|&(_, &r)| r != NONE)
        .map(|(l, &r)| (l, r))
        .collect();
    pairs.sort_unstable();
    pairs
}

fn augment(
    l: usize,
    adjacency: &[Vec<usize>],
    match_left: &mut [usize],
    match_right: &mut [usize],
    dist: &mut [usize],
) -> bool {
    const NONE: usize = usize::MAX;
    let layer = dist[l];
    dist[l] = NONE; // do not revisit within this phase
    for &r in &adjacency[l] {
        let next = match_right[r];
        let reachable = match next {
            NONE => true,
            next => dist[next] == layer + 1 && augment(next, adjacency, match_left, match_right, dist),
        };
        if reachable {
            match_left[l] = r;
            match_right[r] = l;
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn note(pitch: u8, onset: f64, offset: f64) -> Note {
        Note::new(pitch, onset, offset, 64)
    }

    #[test]
    fn identical_single_notes_match() {
        let ref_ = [note(60, 0.0, 1.0)];
        let est = [note(60, 0.0, 1.0)];
        let m = match_onset(&ref_, &est, &Tolerances::default());
        assert_eq!((m.tp, m.fp, m.fn_), (1, 0, 0));
        assert_eq!(m.pairs, vec![(0, 0)]);
    }

    #[test]
    fn onset_just_outside_fifty_ms_fails() {
        let ref_ = [note(60, 0.0, 1.0)];
        let est = [note(60, 0.051, 1.0)];
        let m = match_onset(&ref_, &est, &Tolerances::default());
        assert_eq!((m.tp, m.fp, m.fn_), (0, 1, 1));
    }

    #[test]
    fn onset_at_exactly_fifty_ms_passes() {
        let ref_ = [note(60, 0.0, 1.0)];
        let est = [note(60, 0.050, 1.0)];
        let m = match_onset(&ref_, &est, &Tolerances::default());
        assert_eq!(m.tp, 1);
    }

    #[test]
    fn two_candidates_one_estimate_yields_single_pair() {
        // Both reference notes admit the estimate; only one can take it.
        let ref_ = [note(60, 0.00, 1.0), note(60, 0.04, 1.0)];
        let est = [note(60, 0.03, 1.0)];
        let m = match_onset(&ref_, &est, &Tolerances::default());
        assert_eq!((m.tp, m.fp, m.fn_), (1, 0, 1));
        // Closer onset (0.04 vs 0.03) wins the tie.
        assert_eq!(m.pairs, vec![(1, 0)]);
    }

    #[test]
    fn crossing_candidates_still_reach_maximum() {
        // Greedy by list order would pair r0-e1 and strand e0; maximum
        // matching pairs both.
        let ref_ = [note(60, 0.00, 1.0), note(60, 0.02, 1.0)];
        let est = [note(60, 0.04, 1.0), note(60, 0.01, 1.0)];
        let m = match_onset(&ref_, &est, &Tolerances::default());
        assert_eq!(m.tp, 2);
    }

    #[test]
    fn long_note_offset_uses_ratio() {
        let ref_ = [note(60, 0.0, 1.0)];
        let est = [note(60, 0.0, 1.19)];
        let m = match_onset_offset(&ref_, &est, &Tolerances::default());
        assert_eq!(m.tp, 1, "tolerance is max(0.05, 0.2 * 1.0) = 0.2");
    }

    #[test]
    fn short_note_offset_uses_floor() {
        let ref_ = [note(60, 0.0, 0.1)];
        let est = [note(60, 0.0, 0.149)];
        let m = match_onset_offset(&ref_, &est, &Tolerances::default());
        assert_eq!(m.tp, 1, "tolerance is max(0.05, 0.02) = 0.05");
        let miss = [note(60, 0.0, 0.151)];
        assert_eq!(match_onset_offset(&ref_, &miss, &Tolerances::default()).tp, 0);
    }

    #[test]
    fn identical_lists_match_fully_with_offsets() {
        let notes = [note(60, 0.0, 0.5), note(64, 0.5, 1.0), note(67, 1.0, 2.0)];
        let m = match_onset_offset(&notes, &notes, &Tolerances::default());
        assert_eq!((m.tp, m.fp, m.fn_), (3, 0, 0));
    }

    #[test]
    fn empty_inputs_are_valid() {
        let m = match_onset(&[], &[], &Tolerances::default());
        assert_eq!((m.tp, m.fp, m.fn_), (0, 0, 0));
        let one = [note(60, 0.0, 1.0)];
        let m = match_onset(&one, &[], &Tolerances::default());
        assert_eq!((m.tp, m.fp, m.fn_), (0, 0, 1));
        let m = match_onset(&[], &one, &Tolerances::default());
        assert_eq!((m.tp, m.fp, m.fn_), (0, 1, 0));
    }

    #[test]
    fn empty_edge_set_gives_empty_matching() {
        assert!(max_bipartite_matching(4, 4, &[]).is_empty());
    }

    #[test]
    fn complete_three_by_three_saturates() {
        let mut edges = Vec::new();
        for l in 0..3 {
            for r in 0..3 {
                edges.push((l, r));
            }
        }
        assert_eq!(max_bipartite_matching(3, 3, &edges).len(), 3);
    }

    #[test]
    fn matching_is_deterministic() {
        let ref_: Vec<Note> = (0..8).map(|i| note(60, i as f64 * 0.01, 1.0)).collect();
        let est: Vec<Note> = (0..8).map(|i| note(60, 0.005 + i as f64 * 0.01, 1.0)).collect();
        let a = match_onset(&ref_, &est, &Tolerances::default());
        let b = match_onset(&ref_, &est, &Tolerances::default());
        assert_eq!(a.pairs, b.pairs);
    }

    #[test]
    fn symmetry_swaps_fp_and_fn() {
        let ref_ = [note(60, 0.0, 1.0), note(62, 0.5, 1.0), note(64, 1.0, 1.5)];
        let est = [note(60, 0.01, 1.0), note(65, 1.0, 1.5)];
        let fwd = match_onset(&ref_, &est, &Tolerances::default());
        let rev = match_onset(&est, &ref_, &Tolerances::default());
        assert_eq!(fwd.tp, rev.tp);
        assert_eq!(fwd.fp, rev.fn_);
        assert_eq!(fwd.fn_, rev.fp);
    }
}
