//! Independent oracles shared by the integration tests and the acceptance
//! binary. Nothing here calls the library's likelihood code.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stratboost::{validate_dataset, RawColumns, SurvivalDataset};

/// Plain row-major copy of a dataset.
pub struct Plain {
    pub time: Vec<f64>,
    pub event: Vec<bool>,
    pub stratum: Vec<usize>,
    pub x: Vec<Vec<f64>>,
}

impl Plain {
    pub fn of(data: &SurvivalDataset) -> Self {
        Plain {
            time: data.time().to_vec(),
            event: data.status().to_vec(),
            stratum: data.stratum().to_vec(),
            x: (0..data.n()).map(|i| data.row(i)).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.time.len()
    }

    pub fn eta(&self, beta: &[f64]) -> Vec<f64> {
        self.x
            .iter()
            .map(|row| row.iter().zip(beta).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn at_risk(&self, i: usize, l: usize) -> bool {
        self.stratum[l] == self.stratum[i] && self.time[l] >= self.time[i]
    }

    /// Σ_events [η_i − log Σ_{l ∈ R_i} exp η_l], enumerating every risk set.
    pub fn loglik(&self, beta: &[f64]) -> f64 {
        let eta = self.eta(beta);
        let mut ll = 0.0;
        for i in 0..self.n() {
            if !self.event[i] {
                continue;
            }
            let s0: f64 = (0..self.n())
                .filter(|&l| self.at_risk(i, l))
                .map(|l| eta[l].exp())
                .sum();
            ll += eta[i] - s0.ln();
        }
        ll
    }

    pub fn score(&self, beta: &[f64], j: usize) -> f64 {
        let eta = self.eta(beta);
        let mut g = 0.0;
        for i in 0..self.n() {
            if !self.event[i] {
                continue;
            }
            let (mut s0, mut s1) = (0.0, 0.0);
            for l in (0..self.n()).filter(|&l| self.at_risk(i, l)) {
                let w = eta[l].exp();
                s0 += w;
                s1 += w * self.x[l][j];
            }
            g += self.x[i][j] - s1 / s0;
        }
        g
    }

    /// Negative Hessian entry (j, k).
    pub fn information(&self, beta: &[f64], j: usize, k: usize) -> f64 {
        let eta = self.eta(beta);
        let mut h = 0.0;
        for i in 0..self.n() {
            if !self.event[i] {
                continue;
            }
            let (mut s0, mut sj, mut sk, mut sjk) = (0.0, 0.0, 0.0, 0.0);
            for l in (0..self.n()).filter(|&l| self.at_risk(i, l)) {
                let w = eta[l].exp();
                s0 += w;
                sj += w * self.x[l][j];
                sk += w * self.x[l][k];
                sjk += w * self.x[l][j] * self.x[l][k];
            }
            h += sjk / s0 - (sj / s0) * (sk / s0);
        }
        h
    }
}

/// Random dataset with n subjects, p standard-normal covariates, up to G
/// strata and integer-rounded times so that ties occur.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, p: usize, groups: usize) -> SurvivalDataset {
    loop {
        let time: Vec<f64> = (0..n).map(|_| rng.random_range(1..=n.max(4)) as f64 * 0.5).collect();
        let status: Vec<i64> = (0..n).map(|_| i64::from(rng.random_bool(0.7))).collect();
        let stratum: Vec<String> = (0..n).map(|_| rng.random_range(0..groups).to_string()).collect();
        let covariates: Vec<Vec<f64>> = (0..p)
            .map(|_| (0..n).map(|_| normal(rng)).collect())
            .collect();
        let raw = RawColumns {
            time,
            status,
            stratum: Some(stratum),
            covariates,
            names: (1..=p).map(|j| format!("V{j}")).collect(),
        };
        if let Ok(d) = validate_dataset(raw) {
            return d;
        }
    }
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample::<f64, _>(rand_distr::StandardNormal)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Nelder–Mead minimisation with restarts.
pub fn nelder_mead(f: impl Fn(&[f64]) -> f64, start: &[f64], step: f64, tol: f64) -> Vec<f64> {
    let dim = start.len();
    let mut best = start.to_vec();
    for _restart in 0..5 {
        let mut simplex: Vec<Vec<f64>> = vec![best.clone()];
        for k in 0..dim {
            let mut v = best.clone();
            v[k] += step;
            simplex.push(v);
        }
        let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
        for _ in 0..20_000 {
            let mut idx: Vec<usize> = (0..=dim).collect();
            idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
            values = idx.iter().map(|&i| values[i]).collect();
            if (values[dim] - values[0]).abs() < tol {
                break;
            }
            let centroid: Vec<f64> = (0..dim)
                .map(|k| simplex[..dim].iter().map(|v| v[k]).sum::<f64>() / dim as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                (0..dim)
                    .map(|k| centroid[k] + t * (simplex[dim][k] - centroid[k]))
                    .collect()
            };
            let reflected = along(-1.0);
            let fr = f(&reflected);
            if fr < values[0] {
                let expanded = along(-2.0);
                let fe = f(&expanded);
                if fe < fr {
                    simplex[dim] = expanded;
                    values[dim] = fe;
                } else {
                    simplex[dim] = reflected;
                    values[dim] = fr;
                }
            } else if fr < values[dim - 1] {
                simplex[dim] = reflected;
                values[dim] = fr;
            } else {
                let contracted = if fr < values[dim] { along(-0.5) } else { along(0.5) };
                let fc = f(&contracted);
                if fc < values[dim].min(fr) {
                    simplex[dim] = contracted;
                    values[dim] = fc;
                } else {
                    for i in 1..=dim {
                        for k in 0..dim {
                            simplex[i][k] = simplex[0][k] + 0.5 * (simplex[i][k] - simplex[0][k]);
                        }
                        values[i] = f(&simplex[i]);
                    }
                }
            }
        }
        let i = (0..=dim).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
        if best == simplex[i] {
            break;
        }
        best = simplex[i].clone();
    }
    best
}

/// One-sample Kolmogorov–Smirnov statistic and its asymptotic p-value.
pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let d = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let p: f64 = (1..=100)
        .map(|k| {
            let k = k as f64;
            2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp()
        })
        .sum();
    (d, p.clamp(0.0, 1.0))
}

pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}
