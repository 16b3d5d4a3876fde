use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::BanditEnv;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating {
    /// 1-indexed
    pub user: usize,
    /// 1-indexed
    pub item: usize,
    pub rating: f64,
    pub timestamp: u64,
}

/// Parse a tab-separated `user_id  item_id  rating  timestamp` file.
pub fn parse_ratings(path: &Path) -> Result<Vec<Rating>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_line(&line).map_err(|message| Error::Parse { line: line_no, message })?);
    }
    Ok(out)
}

fn parse_line(line: &str) -> std::result::Result<Rating, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 4 {
        return Err(format!("expected 4 tab-separated fields, found {}", fields.len()));
    }
    let id = |s: &str, what: &str| -> std::result::Result<usize, String> {
        match s.trim().parse::<usize>() {
            Ok(v) if v >= 1 => Ok(v),
            _ => Err(format!("invalid {what} `{s}`")),
        }
    };
    let user = id(fields[0], "user id")?;
    let item = id(fields[1], "item id")?;
    let rating: f64 = fields[2]
        .trim()
        .parse()
        .ok()
        .filter(|r: &f64| r.is_finite())
        .ok_or_else(|| format!("invalid rating `{}`", fields[2]))?;
    let timestamp = fields[3]
        .trim()
        .parse()
        .map_err(|_| format!("invalid timestamp `{}`", fields[3]))?;
    Ok(Rating {
        user,
        item,
        rating,
        timestamp,
    })
}

/// Low-rank reward simulator built from a users × movies ratings matrix.
#[derive(Debug, Clone)]
pub struct MovieLensSim {
    /// Users × movies, missing ratings as 0.
    pub ratings: DMatrix<f64>,
    /// `U_K`, users × K
    pub user_factors: DMatrix<f64>,
    /// `V_K`, movies × K
    pub item_factors: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    /// `X̂ = U_K S_K V_Kᵀ`
    pub reconstruction: DMatrix<f64>,
    /// Row `i` is the context of user `i`: `U_K S_K`.
    pub contexts: Vec<Vec<f64>>,
    pub num_triples: usize,
}

impl MovieLensSim {
    /// Slice movies `1..=num_movies` and keep the top `rank` singular triplets.
    pub fn from_ratings(ratings: &[Rating], num_movies: usize, rank: usize) -> Result<Self> {
        if ratings.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let num_users = ratings.iter().map(|r| r.user).max().unwrap();
        let num_items = ratings.iter().map(|r| r.item).max().unwrap();
        if num_movies == 0 || num_movies > num_items {
            return Err(Error::dim(format!("num_movies {num_movies} must be in 1..={num_items}")));
        }
        let max_rank = num_users.min(num_movies);
        if rank == 0 || rank > max_rank {
            return Err(Error::Rank { rank, max: max_rank });
        }
        let mut x = DMatrix::zeros(num_users, num_movies);
        for r in ratings.iter().filter(|r| r.item <= num_movies) {
            x[(r.user - 1, r.item - 1)] = r.rating;
        }
        let svd = x.clone().svd(true, true);
        let u = svd.u.ok_or_else(|| Error::dim("SVD did not produce U"))?;
        let v_t = svd.v_t.ok_or_else(|| Error::dim("SVD did not produce Vᵀ"))?;
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let keep = &order[..rank];
        let user_factors = DMatrix::from_fn(num_users, rank, |i, k| u[(i, keep[k])]);
        let item_factors = DMatrix::from_fn(num_movies, rank, |j, k| v_t[(keep[k], j)]);
        let singular_values = DVector::from_fn(rank, |k, _| svd.singular_values[keep[k]]);
        let scaled = DMatrix::from_fn(num_users, rank, |i, k| user_factors[(i, k)] * singular_values[k]);
        let reconstruction = &scaled * item_factors.transpose();
        let contexts = scaled.row_iter().map(|r| r.iter().copied().collect()).collect();
        Ok(Self {
            ratings: x,
            user_factors,
            item_factors,
            singular_values,
            reconstruction,
            contexts,
            num_triples: ratings.len(),
        })
    }

    pub fn num_users(&self) -> usize {
        self.ratings.nrows()
    }

    pub fn num_movies(&self) -> usize {
        self.ratings.ncols()
    }

    /// `‖X − X̂‖_F / ‖X‖_F`.
    pub fn reconstruction_error(&self) -> f64 {
        let denom = self.ratings.norm();
        if denom == 0.0 {
            return (&self.ratings - &self.reconstruction).norm();
        }
        (&self.ratings - &self.reconstruction).norm() / denom
    }

    pub fn reward_range(&self) -> (f64, f64) {
        (self.reconstruction.min(), self.reconstruction.max())
    }
}

/// Each step a user is drawn uniformly (with replacement); arm `j`
/// recommends movie `j` and pays `X̂[user, j]`.
#[derive(Debug, Clone)]
pub struct MovieLensEnv {
    sim: Arc<MovieLensSim>,
    users: Vec<usize>,
}

impl MovieLensEnv {
    pub fn user(&self, t: usize) -> usize {
        self.users[t]
    }

    pub fn sim(&self) -> &MovieLensSim {
        &self.sim
    }
}

pub fn movielens_env(sim: Arc<MovieLensSim>, horizon: usize, seed: u64) -> MovieLensEnv {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = sim.num_users();
    let users = (0..horizon).map(|_| rng.random_range(0..n)).collect();
    MovieLensEnv { sim, users }
}

impl BanditEnv for MovieLensEnv {
    fn name(&self) -> &str {
        "movielens"
    }

    fn num_actions(&self) -> usize {
        self.sim.num_movies()
    }

    fn state_dim(&self) -> usize {
        self.sim.singular_values.len()
    }

    fn horizon(&self) -> usize {
        self.users.len()
    }

    fn state(&self, t: usize) -> &[f64] {
        &self.sim.contexts[self.users[t]]
    }

    fn reward(&self, t: usize, action: usize) -> f64 {
        self.sim.reconstruction[(self.users[t], action)]
    }

    fn expected_rewards(&self, t: usize) -> Option<Vec<f64>> {
        Some(self.sim.reconstruction.row(self.users[t]).iter().copied().collect())
    }
}
