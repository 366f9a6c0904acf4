//! Greedy topology clustering of tree pairs into minibatches with small hulls.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::topology::Topology;

/// Clustering key of one tree pair: one topology per side.
pub type Mask = Vec<Topology>;

fn mask_size(m: &[Topology]) -> usize {
    m.iter().map(Topology::size).sum()
}

fn mask_key(m: &[Topology]) -> String {
    m.iter()
        .map(Topology::serialize)
        .collect::<Vec<_>>()
        .join("|")
}

/// `‖hull(c ∪ {t})‖ − ‖hull(c)‖`, summed over sides.
pub fn hull_increment(hull: &[Topology], t: &[Topology]) -> usize {
    hull.iter().zip(t).map(|(h, x)| h.increment(x)).sum()
}

/// Side-wise hull of a non-empty list of masks.
pub fn mask_hull<'a>(masks: impl IntoIterator<Item = &'a Mask>) -> Option<Mask> {
    let mut it = masks.into_iter();
    let first = it.next()?.clone();
    Some(it.fold(first, |acc, m| {
        acc.iter().zip(m).map(|(a, b)| a.union(b)).collect()
    }))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    /// Indices into the clustered mask list, ascending.
    pub members: Vec<usize>,
    pub hulls: Mask,
    /// Schedule step at which the cluster was frozen (0-based).
    pub stage: usize,
}

impl Cluster {
    pub fn hull_size(&self) -> usize {
        mask_size(&self.hulls)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clustering {
    pub clusters: Vec<Cluster>,
}

impl Clustering {
    /// Each mask in its own cluster.
    pub fn singletons(masks: &[Mask]) -> Self {
        Clustering {
            clusters: masks
                .iter()
                .enumerate()
                .map(|(i, m)| Cluster {
                    members: vec![i],
                    hulls: m.clone(),
                    stage: 0,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// `Σ_x ‖a_(x's cluster)‖`.
    pub fn total_hull_size(&self) -> u64 {
        self.clusters
            .iter()
            .map(|c| (c.members.len() * c.hull_size()) as u64)
            .sum()
    }

    pub fn n_members(&self) -> usize {
        self.clusters.iter().map(|c| c.members.len()).sum()
    }
}

/// `#clusters · (Σ hull sizes)^α`.
pub fn cost_proxy_raw(n_clusters: u64, total_hull_size: u64, alpha: f64) -> f64 {
    n_clusters as f64 * (total_hull_size as f64).powf(alpha)
}

pub fn cost_proxy(c: &Clustering, alpha: f64) -> f64 {
    cost_proxy_raw(c.len() as u64, c.total_hull_size(), alpha)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedules {
    pub min_elems: Vec<usize>,
    pub max_size: Vec<usize>,
}

impl Schedules {
    /// Geometric schedules from `⌊2 % · n⌋` down to 1 and from 5 up to 5·10⁴.
    pub fn geometric(n_trees: usize, steps: usize) -> Self {
        assert!(steps >= 2, "schedules need at least two steps");
        let c = 0.02 * n_trees as f64;
        let last = (steps - 1) as f64;
        let min_elems = (0..steps)
            .map(|i| {
                // c / c^(i/(L−1)) written as c^((L−1−i)/(L−1)) so the last step is exactly 1.
                let v = c.powf((steps - 1 - i) as f64 / last).floor() as usize;
                v.max(1)
            })
            .collect();
        let max_size = (0..steps)
            .map(|i| (5.0 * 1e4f64.powf(i as f64 / last)).floor() as usize)
            .collect();
        Schedules {
            min_elems,
            max_size,
        }
    }

    pub fn len(&self) -> usize {
        self.min_elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.min_elems.is_empty()
    }
}

/// Identical masks, clustered together for free.
#[derive(Debug, Clone)]
struct Group {
    mask: Mask,
    size: usize,
    key: String,
    members: Vec<usize>,
}

/// Masks not yet in a frozen cluster, grouped and kept in ascending
/// (size, serialization) order.
#[derive(Debug, Clone)]
pub struct Pool {
    groups: Vec<Group>,
}

impl Pool {
    pub fn new(masks: &[Mask]) -> Self {
        let mut by_key: BTreeMap<String, Group> = BTreeMap::new();
        for (i, m) in masks.iter().enumerate() {
            let key = mask_key(m);
            by_key
                .entry(key.clone())
                .or_insert_with(|| Group {
                    mask: m.clone(),
                    size: mask_size(m),
                    key,
                    members: Vec::new(),
                })
                .members
                .push(i);
        }
        let mut groups: Vec<Group> = by_key.into_values().collect();
        groups.sort_by(|a, b| a.size.cmp(&b.size).then_with(|| a.key.cmp(&b.key)));
        Pool { groups }
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn n_masks(&self) -> usize {
        self.groups.iter().map(|g| g.members.len()).sum()
    }
}

/// One pass of the greedy cluster finder over the pool. Each group still in
/// the pool seeds a cluster once, in pool order. A cluster first absorbs all
/// masks that leave its hull unchanged, then the mask of least increment
/// (ties: smaller serialization) as long as the hull stays within `max_size`.
/// Clusters with fewer than `min_elems` members are resolved back into the
/// pool. With `final_stage`, every seed is frozen, oversize seeds included.
pub fn find_clusters(
    clustering: &mut Clustering,
    pool: &mut Pool,
    min_elems: usize,
    max_size: usize,
    stage: usize,
    final_stage: bool,
) {
    let mut groups: Vec<Option<Group>> = std::mem::take(&mut pool.groups)
        .into_iter()
        .map(Some)
        .collect();

    for seed_idx in 0..groups.len() {
        let Some(seed) = groups[seed_idx].take() else {
            continue;
        };
        if seed.size > max_size && !final_stage {
            groups[seed_idx] = Some(seed);
            continue;
        }
        let mut hull = seed.mask.clone();
        let mut hull_size = seed.size;
        let mut taken: Vec<usize> = vec![seed_idx];
        let mut members: usize = seed.members.len();
        groups[seed_idx] = Some(seed);
        let mut in_cluster = vec![false; groups.len()];
        in_cluster[seed_idx] = true;

        loop {
            let budget = max_size.saturating_sub(hull_size);
            // (increment, index) for every available group that could fit.
            let scan: Vec<(usize, usize)> = groups
                .par_iter()
                .enumerate()
                .filter_map(|(i, g)| {
                    let g = g.as_ref()?;
                    if in_cluster[i] || g.size > max_size {
                        return None;
                    }
                    let inc = hull_increment(&hull, &g.mask);
                    (inc == 0 || inc <= budget).then_some((inc, i))
                })
                .collect();
            let mut added = false;
            for &(inc, i) in &scan {
                if inc == 0 {
                    in_cluster[i] = true;
                    taken.push(i);
                    members += groups[i].as_ref().map_or(0, |g| g.members.len());
                    added = true;
                }
            }
            let best = scan
                .iter()
                .filter(|(inc, _)| *inc > 0)
                .min_by(|a, b| {
                    a.0.cmp(&b.0).then_with(|| {
                        let ka = &groups[a.1].as_ref().expect("scanned group").key;
                        let kb = &groups[b.1].as_ref().expect("scanned group").key;
                        ka.cmp(kb)
                    })
                })
                .copied();
            if let Some((inc, i)) = best {
                let g = groups[i].as_ref().expect("scanned group");
                hull = hull.iter().zip(&g.mask).map(|(a, b)| a.union(b)).collect();
                hull_size += inc;
                debug_assert_eq!(hull_size, mask_size(&hull));
                in_cluster[i] = true;
                taken.push(i);
                members += g.members.len();
                added = true;
            }
            if !added {
                break;
            }
        }

        if members < min_elems && !final_stage {
            // Resolved: the groups stay in the pool for later seeds and stages.
            continue;
        }
        let mut cluster_members = Vec::with_capacity(members);
        for i in taken {
            let g = groups[i].take().expect("group taken once");
            cluster_members.extend(g.members);
        }
        cluster_members.sort_unstable();
        clustering.clusters.push(Cluster {
            members: cluster_members,
            hulls: hull,
            stage,
        });
    }
    pool.groups = groups.into_iter().flatten().collect();
}

/// Runs [`find_clusters`] once per schedule step, threading the partial clustering.
pub fn pick_clustering(masks: &[Mask], s: &Schedules) -> Clustering {
    let mut clustering = Clustering::default();
    let mut pool = Pool::new(masks);
    let steps = s.len();
    for (i, (&min_elems, &max_size)) in s.min_elems.iter().zip(&s.max_size).enumerate() {
        if pool.is_empty() {
            break;
        }
        let before = clustering.len();
        find_clusters(
            &mut clustering,
            &mut pool,
            min_elems,
            max_size,
            i,
            i + 1 == steps,
        );
        log::debug!(
            "stage {i}: min_elems {min_elems}, max_size {max_size}, {} new clusters, {} masks left",
            clustering.len() - before,
            pool.n_masks()
        );
    }
    clustering
}
