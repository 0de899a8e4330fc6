use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;

use super::constraints::{virtual_distance, MatchConstraints};
use super::MatchError;
use crate::geo::BucketProjection;
use crate::population::{Commuter, CommuterId, DEFAULT_CAPACITY};

type BucketKey = [i32; 4];

/// A population prepared for matching: commuters sorted by id plus the
/// option set of every commuter.
///
/// Option sets are found through a hash grid over (home cell, work cell) with
/// cells slightly wider than delta, so only the 81 surrounding buckets are
/// scanned per commuter. Each option list is sorted by virtual distance, then id.
#[derive(Debug, Clone)]
pub struct MatchingInstance {
    commuters: Vec<Commuter>,
    constraints: MatchConstraints,
    offsets: Vec<usize>,
    option_idx: Vec<u32>,
    option_dist: Vec<f64>,
    index_of: HashMap<CommuterId, usize>,
}

impl MatchingInstance {
    pub fn new(commuters: &[Commuter], constraints: &MatchConstraints) -> Result<Self, MatchError> {
        constraints.validate()?;
        let mut sorted = commuters.to_vec();
        sorted.sort_by_key(|c| c.id);
        if let Some(w) = sorted.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(MatchError::DuplicateId(w[0].id));
        }
        let index_of = sorted.iter().enumerate().map(|(i, c)| (c.id, i)).collect();

        let cell_km = constraints.delta_km * 1.01 + 1e-6;
        let proj = BucketProjection::new(sorted.iter().flat_map(|c| [c.home, c.work]), cell_km);
        let keys: Vec<BucketKey> = sorted
            .iter()
            .map(|c| {
                let (hr, hc) = proj.key(c.home);
                let (wr, wc) = proj.key(c.work);
                [hr, hc, wr, wc]
            })
            .collect();
        let mut buckets: HashMap<BucketKey, Vec<u32>> = HashMap::new();
        for (i, k) in keys.iter().enumerate() {
            buckets.entry(*k).or_default().push(i as u32);
        }

        let lists: Vec<Vec<(f64, u32)>> = (0..sorted.len())
            .into_par_iter()
            .map(|i| {
                let me = &sorted[i];
                let k = keys[i];
                let mut found = Vec::new();
                for d0 in -1..=1 {
                    for d1 in -1..=1 {
                        for d2 in -1..=1 {
                            for d3 in -1..=1 {
                                let Some(bucket) = buckets.get(&[k[0] + d0, k[1] + d1, k[2] + d2, k[3] + d3]) else {
                                    continue;
                                };
                                for &j in bucket {
                                    if j as usize == i {
                                        continue;
                                    }
                                    if let Some(d) = virtual_distance(me, &sorted[j as usize], constraints) {
                                        found.push((d, j));
                                    }
                                }
                            }
                        }
                    }
                }
                found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                found
            })
            .collect();

        let mut offsets = Vec::with_capacity(sorted.len() + 1);
        offsets.push(0);
        let total: usize = lists.iter().map(Vec::len).sum();
        let mut option_idx = Vec::with_capacity(total);
        let mut option_dist = Vec::with_capacity(total);
        for list in lists {
            for (d, j) in list {
                option_dist.push(d);
                option_idx.push(j);
            }
            offsets.push(option_idx.len());
        }
        Ok(Self { commuters: sorted, constraints: constraints.clone(), offsets, option_idx, option_dist, index_of })
    }

    pub fn len(&self) -> usize {
        self.commuters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commuters.is_empty()
    }

    pub fn commuters(&self) -> &[Commuter] {
        &self.commuters
    }

    pub fn commuter(&self, i: usize) -> &Commuter {
        &self.commuters[i]
    }

    pub fn constraints(&self) -> &MatchConstraints {
        &self.constraints
    }

    pub fn index_of(&self, id: CommuterId) -> Option<usize> {
        self.index_of.get(&id).copied()
    }

    pub fn option_count(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    /// Options of commuter `i` as `(index, virtual distance)`, nearest first.
    pub fn options_of(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.option_idx[r.clone()].iter().zip(&self.option_dist[r]).map(|(&j, &d)| (j as usize, d))
    }

    pub fn option_total(&self) -> usize {
        self.option_idx.len()
    }

    pub fn virtual_distance(&self, i: usize, j: usize) -> Option<f64> {
        virtual_distance(&self.commuters[i], &self.commuters[j], &self.constraints)
    }

    pub fn penalty(&self, i: usize) -> f64 {
        self.constraints.penalty(&self.commuters[i])
    }

    pub fn capacity(&self, i: usize) -> usize {
        self.commuters[i].capacity as usize
    }

    /// Indices ordered by ascending option count, ties by ascending id.
    pub fn global_ordering(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by_key(|&i| (self.option_count(i), i));
        order
    }

    /// Success if everybody with at least one option rode in a full car of four.
    pub fn tighter_upper_bound(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let optioned = (0..self.len()).filter(|&i| self.option_count(i) > 0).count();
        let cars = optioned.div_ceil(DEFAULT_CAPACITY as usize) + (self.len() - optioned);
        super::success_ratio(self.len(), cars).unwrap_or(0.0)
    }
}

/// Ids of every commuter `u != v` that can share a car with `v`.
pub fn options(v: &Commuter, all: &[Commuter], c: &MatchConstraints) -> Result<BTreeSet<CommuterId>, MatchError> {
    let instance = MatchingInstance::new(all, c)?;
    let i = instance.index_of(v.id).ok_or(MatchError::UnknownCommuter(v.id))?;
    Ok(instance.options_of(i).map(|(j, _)| instance.commuter(j).id).collect())
}

/// Ids ordered by ascending option count, ties by ascending id.
pub fn global_ordering(all: &[Commuter], c: &MatchConstraints) -> Result<Vec<CommuterId>, MatchError> {
    let instance = MatchingInstance::new(all, c)?;
    Ok(instance.global_ordering().into_iter().map(|i| instance.commuter(i).id).collect())
}

pub fn tighter_upper_bound(all: &[Commuter], c: &MatchConstraints) -> Result<f64, MatchError> {
    Ok(MatchingInstance::new(all, c)?.tighter_upper_bound())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoPoint;
    use proptest::prelude::*;

    fn at(id: u64, north: f64, east: f64, work_north: f64, lh: u32) -> Commuter {
        let home = GeoPoint { lat: 40.4, lon: -3.7 }.offset_km(north, east);
        Commuter {
            id: CommuterId(id),
            home,
            work: GeoPoint { lat: 40.45, lon: -3.65 }.offset_km(work_north, 0.0),
            leave_home: lh,
            leave_work: lh + 480,
            capacity: 4,
            has_car: true,
        }
    }

    #[test]
    fn isolated_has_no_options() {
        let all = vec![at(1, 0.0, 0.0, 0.0, 540), at(2, 10.0, 0.0, 0.0, 540)];
        let c = MatchConstraints::new(1.0, None).unwrap();
        assert!(options(&all[0], &all, &c).unwrap().is_empty());
        assert_eq!(tighter_upper_bound(&all, &c).unwrap(), 0.0);
        assert_eq!(global_ordering(&all, &c).unwrap(), vec![CommuterId(1), CommuterId(2)]);
    }

    #[test]
    fn clones_see_each_other() {
        let all: Vec<_> = (0..5).map(|i| at(i, 0.0, 0.0, 0.0, 540)).collect();
        let c = MatchConstraints::new(0.0, None).unwrap();
        for v in &all {
            assert_eq!(options(v, &all, &c).unwrap().len(), 4);
        }
    }

    #[test]
    fn scarcest_first() {
        // 1 reaches only 2; 2,3,4 see each other and 1 is in 2's list.
        let all = vec![
            at(4, 0.5, 0.0, 0.0, 540),
            at(1, -0.6, 0.0, 0.0, 540),
            at(2, 0.0, 0.0, 0.0, 540),
            at(3, 0.3, 0.0, 0.0, 540),
        ];
        let c = MatchConstraints::new(0.7, None).unwrap();
        let order = global_ordering(&all, &c).unwrap();
        assert_eq!(order[0], CommuterId(1));
        assert_eq!(order, global_ordering(&all, &c).unwrap());
    }

    #[test]
    fn tighter_bound_formula() {
        // 60 commuters in 15 exact-clone quartets, 40 scattered singles.
        let mut all = Vec::new();
        for g in 0..15 {
            for k in 0..4 {
                all.push(at(g * 4 + k, g as f64 * 3.0, 0.0, 0.0, 540));
            }
        }
        for s in 0..40 {
            all.push(at(100 + s, -5.0 - s as f64 * 3.0, 20.0, 0.0, 540));
        }
        let c = MatchConstraints::new(0.5, None).unwrap();
        assert_eq!(tighter_upper_bound(&all, &c).unwrap(), 45.0);

        let quartets: Vec<_> = all[..16].to_vec();
        assert_eq!(tighter_upper_bound(&quartets, &c).unwrap(), 75.0);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let all = vec![at(1, 0.0, 0.0, 0.0, 540), at(1, 1.0, 0.0, 0.0, 540)];
        assert!(matches!(
            MatchingInstance::new(&all, &MatchConstraints::new(1.0, None).unwrap()),
            Err(MatchError::DuplicateId(_))
        ));
    }

    fn population() -> impl Strategy<Value = Vec<Commuter>> {
        prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0, -2.0f64..2.0, 500u32..580), 1..60).prop_map(|v| {
            v.into_iter().enumerate().map(|(i, (n, e, w, lh))| at(i as u64, n, e, w, lh)).collect()
        })
    }

    proptest! {
        #[test]
        fn bucketed_options_equal_all_pairs(all in population(), delta in 0.0f64..2.5, tau in prop::option::of(0u32..40)) {
            let c = MatchConstraints::new(delta, tau).unwrap();
            let inst = MatchingInstance::new(&all, &c).unwrap();
            for i in 0..inst.len() {
                let got: BTreeSet<usize> = inst.options_of(i).map(|(j, _)| j).collect();
                let brute: BTreeSet<usize> = (0..inst.len())
                    .filter(|&j| j != i && virtual_distance(inst.commuter(i), inst.commuter(j), &c).is_some())
                    .collect();
                prop_assert_eq!(&got, &brute);
                for &j in &got {
                    prop_assert!(inst.options_of(j).any(|(k, _)| k == i));
                }
                let dists: Vec<f64> = inst.options_of(i).map(|(_, d)| d).collect();
                prop_assert!(dists.windows(2).all(|w| w[0] <= w[1]));
            }
        }

        #[test]
        fn options_grow_with_delta_and_tau(all in population(), d1 in 0.0f64..2.0, extra in 0.0f64..1.0, t1 in 0u32..30, textra in 0u32..30) {
            let small = MatchingInstance::new(&all, &MatchConstraints::new(d1, Some(t1)).unwrap()).unwrap();
            let wider = MatchingInstance::new(&all, &MatchConstraints::new(d1 + extra, Some(t1 + textra)).unwrap()).unwrap();
            let unbounded = MatchingInstance::new(&all, &MatchConstraints::new(d1 + extra, None).unwrap()).unwrap();
            for i in 0..small.len() {
                let a: BTreeSet<usize> = small.options_of(i).map(|(j, _)| j).collect();
                let b: BTreeSet<usize> = wider.options_of(i).map(|(j, _)| j).collect();
                let u: BTreeSet<usize> = unbounded.options_of(i).map(|(j, _)| j).collect();
                prop_assert!(a.is_subset(&b) && b.is_subset(&u));
            }
            prop_assert!(small.tighter_upper_bound() <= wider.tighter_upper_bound());
            prop_assert!(wider.tighter_upper_bound() <= unbounded.tighter_upper_bound());
        }
    }
}
