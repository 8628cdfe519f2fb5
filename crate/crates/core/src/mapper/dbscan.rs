//! Density-based clustering (DBSCAN) with deterministic labelling.
//!
//! A point is a core point when at least `min_pts` points, itself included,
//! lie within distance `epsilon`. Clusters are grown from core points in
//! index order, so cluster ids follow the smallest core index of each
//! cluster. A border point reachable from several clusters joins the one
//! with the lowest id.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::matrix::{squared_distance, Matrix};

use super::MapperError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    /// Neighbourhood radius. Infinite radii serialize as the string `"inf"`.
    #[serde(with = "epsilon_serde")]
    pub epsilon: f64,
    pub min_pts: usize,
}

impl ClusterParams {
    pub fn new(epsilon: f64, min_pts: usize) -> Result<Self, MapperError> {
        let p = ClusterParams { epsilon, min_pts };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), MapperError> {
        // +inf is accepted: it puts every point in one neighbourhood.
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(MapperError::InvalidEpsilon(self.epsilon));
        }
        if self.min_pts < 1 {
            return Err(MapperError::InvalidMinPts(self.min_pts));
        }
        Ok(())
    }
}

mod epsilon_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(eps: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *eps == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*eps)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got \"{t}\""))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Cluster(usize),
    Noise,
}

impl Label {
    pub fn cluster(self) -> Option<usize> {
        match self {
            Label::Cluster(c) => Some(c),
            Label::Noise => None,
        }
    }
}

fn neighbours(points: &Matrix, i: usize, eps_sq: f64) -> Vec<usize> {
    let p = points.row(i);
    (0..points.nrows())
        .filter(|&j| squared_distance(p, points.row(j)) <= eps_sq)
        .collect()
}

/// Labels every row of `points` with a cluster id or [`Label::Noise`].
pub fn dbscan(points: &Matrix, params: &ClusterParams) -> Vec<Label> {
    let n = points.nrows();
    let eps_sq = params.epsilon * params.epsilon;
    let mut labels: Vec<Option<Label>> = vec![None; n];
    let mut next_cluster = 0;

    for i in 0..n {
        if labels[i].is_some() {
            continue;
        }
        let seeds = neighbours(points, i, eps_sq);
        if seeds.len() < params.min_pts {
            labels[i] = Some(Label::Noise);
            continue;
        }
        let cluster = next_cluster;
        next_cluster += 1;
        labels[i] = Some(Label::Cluster(cluster));

        // Points enter the queue at most once: they are labelled on insertion
        // and their neighbourhood is queried when popped.
        let mut queue = VecDeque::new();
        let claim = |nb: Vec<usize>, labels: &mut [Option<Label>], queue: &mut VecDeque<usize>| {
            for k in nb {
                match labels[k] {
                    None => {
                        labels[k] = Some(Label::Cluster(cluster));
                        queue.push_back(k);
                    }
                    // Known non-core point: becomes a border point.
                    Some(Label::Noise) => labels[k] = Some(Label::Cluster(cluster)),
                    Some(Label::Cluster(_)) => {}
                }
            }
        };
        claim(seeds, &mut labels, &mut queue);
        while let Some(j) = queue.pop_front() {
            let nb = neighbours(points, j, eps_sq);
            if nb.len() >= params.min_pts {
                claim(nb, &mut labels, &mut queue);
            }
        }
    }
    labels.into_iter().map(|l| l.unwrap_or(Label::Noise)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_points_form_one_cluster() {
        let pts = Matrix::from_rows(&[[1.0, 1.0]; 5]);
        let labels = dbscan(&pts, &ClusterParams::new(0.1, 2).unwrap());
        assert_eq!(labels, vec![Label::Cluster(0); 5]);
    }

    #[test]
    fn lone_point_is_noise() {
        let pts = Matrix::from_rows(&[[0.0]]);
        assert_eq!(dbscan(&pts, &ClusterParams::new(1.0, 2).unwrap()), vec![Label::Noise]);
        assert_eq!(dbscan(&pts, &ClusterParams::new(1.0, 1).unwrap()), vec![Label::Cluster(0)]);
    }

    #[test]
    fn empty_input() {
        assert!(dbscan(&Matrix::zeros(0, 2), &ClusterParams::new(1.0, 1).unwrap()).is_empty());
    }

    #[test]
    fn border_point_joins_lowest_cluster() {
        // Two dense groups with a shared non-core point in the middle.
        let pts = Matrix::from_rows(&[
            [1.0],
            [0.0],
            [0.125],
            [0.25],
            [0.375],
            [1.625],
            [1.75],
            [1.875],
            [2.0],
        ]);
        let labels = dbscan(&pts, &ClusterParams::new(0.625, 4).unwrap());
        assert_eq!(labels[0], Label::Cluster(0));
        assert_eq!(labels[1], Label::Cluster(0));
        assert_eq!(labels[8], Label::Cluster(1));
    }

    #[test]
    fn epsilon_is_inclusive() {
        let pts = Matrix::from_rows(&[[0.0], [0.5]]);
        let labels = dbscan(&pts, &ClusterParams::new(0.5, 2).unwrap());
        assert_eq!(labels, vec![Label::Cluster(0), Label::Cluster(0)]);
    }

    #[test]
    fn invalid_params() {
        assert!(ClusterParams::new(0.0, 2).is_err());
        assert!(ClusterParams::new(f64::NAN, 2).is_err());
        assert!(ClusterParams::new(1.0, 0).is_err());
        assert!(ClusterParams::new(f64::INFINITY, 1).is_ok());
    }
}
