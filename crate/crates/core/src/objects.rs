//! Object nodes: DBSCAN over prompt-matched points, one axis-aligned box per cluster.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Embedding, SemanticPointCloud, Vec3};
use crate::prompt::PromptResult;
use crate::spatial::KdTree;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DbscanParams {
    pub eps: f64,
    pub min_pts: usize,
}

impl Default for DbscanParams {
    fn default() -> Self {
        Self {
            eps: 0.5,
            min_pts: 5,
        }
    }
}

impl DbscanParams {
    pub fn validate(&self) -> Result<()> {
        if self.eps > 0.0 && self.eps.is_finite() && self.min_pts >= 1 {
            Ok(())
        } else {
            Err(Error::invalid("dbscan needs eps > 0 and min_pts >= 1"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Clustering {
    /// Clusters in discovery order, each sorted ascending.
    pub clusters: Vec<Vec<usize>>,
    pub noise: BTreeSet<usize>,
}

/// DBSCAN with Euclidean distance. Neighborhoods are inclusive and count the point itself.
///
/// Seeds are visited in ascending index order; a border point reachable from several
/// clusters joins the first one discovered.
pub fn dbscan(points: &[Vec3], params: &DbscanParams) -> Clustering {
    const UNSET: usize = usize::MAX;
    let n = points.len();
    let tree = KdTree::new(points);
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| tree.within_radius(&points[i], params.eps))
        .collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= params.min_pts).collect();
    let mut label = vec![UNSET; n];
    let mut clusters = Vec::new();
    for seed in 0..n {
        if label[seed] != UNSET || !core[seed] {
            continue;
        }
        let id = clusters.len();
        let mut members = vec![seed];
        label[seed] = id;
        let mut queue = VecDeque::from([seed]);
        while let Some(p) = queue.pop_front() {
            if !core[p] {
                continue;
            }
            for &q in &neighbors[p] {
                if label[q] == UNSET {
                    label[q] = id;
                    members.push(q);
                    queue.push_back(q);
                }
            }
        }
        members.sort_unstable();
        clusters.push(members);
    }
    let noise = (0..n).filter(|&i| label[i] == UNSET).collect();
    Clustering { clusters, noise }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectNode {
    pub id: u32,
    pub class: String,
    pub min: Vec3,
    pub max: Vec3,
    /// Cloud indices of member points, ascending.
    pub members: Vec<usize>,
    pub centroid: Option<Embedding>,
}

impl ObjectNode {
    pub fn center(&self) -> Vec3 {
        std::array::from_fn(|a| (self.min[a] + self.max[a]) / 2.0)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }
}

/// Clusters the matched points of one prompt and emits one node per cluster.
///
/// Node ids count up from zero in order of each cluster's smallest member index.
pub fn build_object_nodes(
    cloud: &SemanticPointCloud,
    result: &PromptResult,
    params: &DbscanParams,
) -> Result<Vec<ObjectNode>> {
    params.validate()?;
    let indices: Vec<usize> = result.matches.iter().copied().collect();
    if let Some(&bad) = indices.iter().find(|&&i| i >= cloud.len()) {
        return Err(Error::invalid(format!("match index {bad} outside cloud")));
    }
    let positions: Vec<Vec3> = indices.iter().map(|&i| cloud.points[i].position).collect();
    let clustering = dbscan(&positions, params);
    let mut groups: Vec<Vec<usize>> = clustering
        .clusters
        .iter()
        .map(|c| c.iter().map(|&k| indices[k]).collect())
        .collect();
    groups.sort_by_key(|g: &Vec<usize>| g[0]);
    let class = result.query.class_label().to_string();
    groups
        .into_iter()
        .enumerate()
        .map(|(id, members)| {
            let mut min = [f64::INFINITY; 3];
            let mut max = [f64::NEG_INFINITY; 3];
            let mut sum = vec![0.0f64; cloud.dim];
            for &m in &members {
                let p = &cloud.points[m];
                for a in 0..3 {
                    min[a] = min[a].min(p.position[a]);
                    max[a] = max[a].max(p.position[a]);
                }
                for (s, &v) in sum.iter_mut().zip(p.embedding.values()) {
                    *s += v as f64;
                }
            }
            Ok(ObjectNode {
                id: id as u32,
                class: class.clone(),
                min,
                max,
                members,
                centroid: Embedding::new(&sum).ok(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SemanticPoint;
    use crate::prompt::{classify, PromptQuery, QueryKind};

    #[test]
    fn empty_input() {
        let c = dbscan(&[], &DbscanParams::default());
        assert!(c.clusters.is_empty() && c.noise.is_empty());
    }

    #[test]
    fn two_blobs() {
        let mut pts = Vec::new();
        for g in 0..2 {
            for i in 0..5 {
                pts.push([g as f64 * 10.0 + i as f64 * 0.1, 0.0, 0.0]);
            }
        }
        let c = dbscan(&pts, &DbscanParams { eps: 0.5, min_pts: 3 });
        assert_eq!(c.clusters, vec![vec![0, 1, 2, 3, 4], vec![5, 6, 7, 8, 9]]);
        assert!(c.noise.is_empty());
    }

    #[test]
    fn border_goes_to_first_cluster() {
        // core groups at x=0 and x=2, border point at x=1 reachable from both
        let pts = vec![
            [0.0, 0.0, 0.0], [-0.1, 0.0, 0.0], [-0.2, 0.0, 0.0],
            [2.0, 0.0, 0.0], [2.1, 0.0, 0.0], [2.2, 0.0, 0.0],
            [1.0, 0.0, 0.0],
        ];
        let c = dbscan(&pts, &DbscanParams { eps: 1.0, min_pts: 4 });
        assert_eq!(c.clusters, vec![vec![0, 1, 2, 6], vec![3, 4, 5]]);
    }

    #[test]
    fn nodes_from_matches() {
        let dim = 8;
        let q = PromptQuery::pseudo("image of a car", QueryKind::Object, dim);
        let mut cloud = SemanticPointCloud::new(dim);
        // tight 10-point cluster spanning the unit cube, plus a far noise point
        let corners = [[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]];
        for i in 0..10 {
            let t = i as f64 / 9.0;
            let p = [t, t, t];
            cloud.push(SemanticPoint::observed(if i < 2 { corners[i] } else { p }, q.embedding.clone())).unwrap();
        }
        cloud.push(SemanticPoint::observed([50.0, 0.0, 0.0], q.embedding.clone())).unwrap();
        let r = classify(&cloud, &q).unwrap();
        let nodes = build_object_nodes(&cloud, &r, &DbscanParams { eps: 0.5, min_pts: 2 }).unwrap();
        assert_eq!(nodes.len(), 1);
        assert_eq!(nodes[0].min, [0.0; 3]);
        assert_eq!(nodes[0].max, [1.0; 3]);
        assert_eq!(nodes[0].class, "car");
        assert_eq!(nodes[0].members.len(), 10);

        let none = PromptResult { matches: BTreeSet::new(), scores: Default::default(), query: q };
        assert!(build_object_nodes(&cloud, &none, &DbscanParams::default()).unwrap().is_empty());
    }
}
