use super::{Real, Tensor};
use crate::error::{Error, Result};

/// Sparse attention pattern: for every query, the list of key rows it may see,
/// plus per-query and per-key validity flags.
///
/// A logit is kept only when both the query and the key are valid. Queries that
/// are invalid or have no valid key produce an all-zero output row.
#[derive(Clone, Debug, PartialEq)]
pub struct KeySets {
    offsets: Vec<usize>,
    keys: Vec<usize>,
    query_valid: Vec<bool>,
    key_valid: Vec<bool>,
}

impl KeySets {
    pub fn new(
        offsets: Vec<usize>,
        keys: Vec<usize>,
        query_valid: Vec<bool>,
        key_valid: Vec<bool>,
    ) -> Result<Self> {
        if offsets.first() != Some(&0)
            || offsets.windows(2).any(|w| w[0] > w[1])
            || offsets.last() != Some(&keys.len())
        {
            return Err(Error::shape(
                "offsets",
                "offsets must start at 0, be non-decreasing and end at keys.len()",
            ));
        }
        if query_valid.len() + 1 != offsets.len() {
            return Err(Error::shape(
                "query_valid",
                format!("expected {} flags", offsets.len() - 1),
            ));
        }
        if let Some(&k) = keys.iter().find(|&&k| k >= key_valid.len()) {
            return Err(Error::shape(
                "keys",
                format!("key index {k} out of range 0..{}", key_valid.len()),
            ));
        }
        Ok(KeySets {
            offsets,
            keys,
            query_valid,
            key_valid,
        })
    }

    /// Every query sees every key.
    pub fn dense(query_valid: Vec<bool>, key_valid: Vec<bool>) -> Self {
        let nk = key_valid.len();
        let offsets = (0..=query_valid.len()).map(|i| i * nk).collect();
        let keys = (0..query_valid.len()).flat_map(|_| 0..nk).collect();
        KeySets {
            offsets,
            keys,
            query_valid,
            key_valid,
        }
    }

    /// Self-attention within disjoint groups of rows; validity is per row.
    pub fn grouped(groups: &[Vec<usize>], num_rows: usize, valid: Vec<bool>) -> Result<Self> {
        let mut owner = vec![usize::MAX; num_rows];
        for (g, rows) in groups.iter().enumerate() {
            for &r in rows {
                if r >= num_rows || owner[r] != usize::MAX {
                    return Err(Error::shape(
                        "groups",
                        format!("row {r} out of range or in two groups"),
                    ));
                }
                owner[r] = g;
            }
        }
        if owner.contains(&usize::MAX) {
            return Err(Error::shape("groups", "every row must belong to a group"));
        }
        let mut offsets = Vec::with_capacity(num_rows + 1);
        let mut keys = Vec::new();
        offsets.push(0);
        for &g in &owner {
            keys.extend_from_slice(&groups[g]);
            offsets.push(keys.len());
        }
        KeySets::new(offsets, keys, valid.clone(), valid)
    }

    pub fn num_queries(&self) -> usize {
        self.query_valid.len()
    }

    pub fn num_keys(&self) -> usize {
        self.key_valid.len()
    }

    pub fn keys_of(&self, query: usize) -> &[usize] {
        &self.keys[self.offsets[query]..self.offsets[query + 1]]
    }

    fn edges(&self) -> usize {
        self.keys.len()
    }
}

fn check_shapes<F: Real>(
    q: &Tensor<F>,
    k: &Tensor<F>,
    v: &Tensor<F>,
    ks: &KeySets,
    heads: usize,
) -> Result<()> {
    if heads == 0 || !q.cols().is_multiple_of(heads) || !v.cols().is_multiple_of(heads) {
        return Err(Error::shape(
            "heads",
            format!(
                "{heads} heads do not divide widths {} / {}",
                q.cols(),
                v.cols()
            ),
        ));
    }
    if q.cols() != k.cols() {
        return Err(Error::shape(
            "key",
            format!("query width {} vs key width {}", q.cols(), k.cols()),
        ));
    }
    if k.rows() != v.rows() {
        return Err(Error::shape(
            "value",
            format!("{} keys vs {} values", k.rows(), v.rows()),
        ));
    }
    if ks.num_queries() != q.rows() || ks.num_keys() != k.rows() {
        return Err(Error::shape(
            "key_sets",
            format!(
                "pattern is {}x{}, inputs are {}x{}",
                ks.num_queries(),
                ks.num_keys(),
                q.rows(),
                k.rows()
            ),
        ));
    }
    Ok(())
}

/// Forward pass; returns the output and the attention weights laid out as
/// `probs[edge * heads + head]`.
pub(crate) fn forward<F: Real>(
    q: &Tensor<F>,
    k: &Tensor<F>,
    v: &Tensor<F>,
    ks: &KeySets,
    heads: usize,
) -> (Tensor<F>, Vec<F>) {
    let dk = q.cols() / heads;
    let dv = v.cols() / heads;
    let scale = F::one() / F::of(dk as f64).sqrt();
    let mut out = Tensor::zeros(q.rows(), v.cols());
    let mut probs = vec![F::zero(); ks.edges() * heads];
    let mut logits: Vec<F> = Vec::new();
    for i in 0..ks.num_queries() {
        if !ks.query_valid[i] {
            continue;
        }
        let (lo, hi) = (ks.offsets[i], ks.offsets[i + 1]);
        if !ks.keys[lo..hi].iter().any(|&kr| ks.key_valid[kr]) {
            continue;
        }
        let q_row = q.row(i);
        for h in 0..heads {
            let qh = &q_row[h * dk..(h + 1) * dk];
            logits.clear();
            let mut max = F::neg_infinity();
            for &kr in &ks.keys[lo..hi] {
                let l = if ks.key_valid[kr] {
                    let kh = &k.row(kr)[h * dk..(h + 1) * dk];
                    qh.iter()
                        .zip(kh)
                        .fold(F::zero(), |acc, (&a, &b)| acc + a * b)
                        * scale
                } else {
                    F::neg_infinity()
                };
                if l > max {
                    max = l;
                }
                logits.push(l);
            }
            let mut total = F::zero();
            for l in logits.iter_mut() {
                *l = if l.is_finite() {
                    (*l - max).exp()
                } else {
                    F::zero()
                };
                total += *l;
            }
            let out_h = &mut out.row_mut(i)[h * dv..(h + 1) * dv];
            for (e, (&kr, &w)) in ks.keys[lo..hi].iter().zip(&logits).enumerate() {
                let p = w / total;
                probs[(lo + e) * heads + h] = p;
                if p != F::zero() {
                    let vh = &v.row(kr)[h * dv..(h + 1) * dv];
                    for (o, &x) in out_h.iter_mut().zip(vh) {
                        *o += p * x;
                    }
                }
            }
        }
    }
    (out, probs)
}

/// Gradients with respect to `q`, `k`, `v` given the upstream gradient.
#[allow(clippy::too_many_arguments)]
pub(crate) fn backward<F: Real>(
    q: &Tensor<F>,
    k: &Tensor<F>,
    v: &Tensor<F>,
    ks: &KeySets,
    heads: usize,
    probs: &[F],
    dout: &Tensor<F>,
) -> (Tensor<F>, Tensor<F>, Tensor<F>) {
    let dk = q.cols() / heads;
    let dv = v.cols() / heads;
    let scale = F::one() / F::of(dk as f64).sqrt();
    let mut dq = Tensor::zeros(q.rows(), q.cols());
    let mut dkey = Tensor::zeros(k.rows(), k.cols());
    let mut dval = Tensor::zeros(v.rows(), v.cols());
    let mut dp: Vec<F> = Vec::new();
    for i in 0..ks.num_queries() {
        let (lo, hi) = (ks.offsets[i], ks.offsets[i + 1]);
        let g_row = dout.row(i);
        for h in 0..heads {
            let gh = &g_row[h * dv..(h + 1) * dv];
            dp.clear();
            let mut weighted = F::zero();
            for (e, &kr) in ks.keys[lo..hi].iter().enumerate() {
                let p = probs[(lo + e) * heads + h];
                let d = if p != F::zero() {
                    let vh = &v.row(kr)[h * dv..(h + 1) * dv];
                    let dvh = &mut dval.row_mut(kr)[h * dv..(h + 1) * dv];
                    for (acc, &g) in dvh.iter_mut().zip(gh) {
                        *acc += p * g;
                    }
                    gh.iter()
                        .zip(vh)
                        .fold(F::zero(), |acc, (&a, &b)| acc + a * b)
                } else {
                    F::zero()
                };
                weighted += p * d;
                dp.push(d);
            }
            let qh: Vec<F> = q.row(i)[h * dk..(h + 1) * dk].to_vec();
            for (e, &kr) in ks.keys[lo..hi].iter().enumerate() {
                let p = probs[(lo + e) * heads + h];
                if p == F::zero() {
                    continue;
                }
                let ds = p * (dp[e] - weighted) * scale;
                let kh = &k.row(kr)[h * dk..(h + 1) * dk];
                let dqh = &mut dq.row_mut(i)[h * dk..(h + 1) * dk];
                for (acc, &x) in dqh.iter_mut().zip(kh) {
                    *acc += ds * x;
                }
                let dkh = &mut dkey.row_mut(kr)[h * dk..(h + 1) * dk];
                for (acc, &x) in dkh.iter_mut().zip(&qh) {
                    *acc += ds * x;
                }
            }
        }
    }
    (dq, dkey, dval)
}

/// `softmax(Q K^T / sqrt(d_k)) V` over all key rows.
pub fn attention<F: Real>(q: &Tensor<F>, k: &Tensor<F>, v: &Tensor<F>) -> Result<Tensor<F>> {
    let ks = KeySets::dense(vec![true; q.rows()], vec![true; k.rows()]);
    masked_attention(q, k, v, &ks, 1)
}

/// Multi-head masked attention over an explicit key pattern.
pub fn masked_attention<F: Real>(
    q: &Tensor<F>,
    k: &Tensor<F>,
    v: &Tensor<F>,
    ks: &KeySets,
    heads: usize,
) -> Result<Tensor<F>> {
    check_shapes(q, k, v, ks, heads)?;
    Ok(forward(q, k, v, ks, heads).0)
}

pub(crate) fn validate<F: Real>(
    q: &Tensor<F>,
    k: &Tensor<F>,
    v: &Tensor<F>,
    ks: &KeySets,
    heads: usize,
) -> Result<()> {
    check_shapes(q, k, v, ks, heads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn random(r: &mut impl Rng, rows: usize, cols: usize) -> Tensor<f64> {
        Tensor::from_vec(
            rows,
            cols,
            (0..rows * cols)
                .map(|_| r.random_range(-1.0..1.0))
                .collect(),
        )
    }

    /// Textbook dense attention, used as an independent reference.
    fn reference(q: &Tensor<f64>, k: &Tensor<f64>, v: &Tensor<f64>) -> Tensor<f64> {
        let d = q.cols() as f64;
        let mut out = Tensor::zeros(q.rows(), v.cols());
        for i in 0..q.rows() {
            let s: Vec<f64> = (0..k.rows())
                .map(|j| {
                    (0..q.cols())
                        .map(|c| q.get(i, c) * k.get(j, c))
                        .sum::<f64>()
                        / d.sqrt()
                })
                .collect();
            let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = s.iter().map(|x| (x - m).exp()).collect();
            let z: f64 = e.iter().sum();
            for j in 0..k.rows() {
                for c in 0..v.cols() {
                    out.row_mut(i)[c] += e[j] / z * v.get(j, c);
                }
            }
        }
        out
    }

    #[test]
    fn matches_reference() {
        let mut r = rng::stream(1, 0);
        let (q, k, v) = (
            random(&mut r, 5, 4),
            random(&mut r, 7, 4),
            random(&mut r, 7, 3),
        );
        assert!(
            attention(&q, &k, &v)
                .unwrap()
                .max_abs_diff(&reference(&q, &k, &v))
                < 1e-14
        );
    }

    #[test]
    fn single_key_returns_its_value() {
        let mut r = rng::stream(2, 0);
        let (q, k, v) = (
            random(&mut r, 3, 4),
            random(&mut r, 1, 4),
            random(&mut r, 1, 2),
        );
        let out = attention(&q, &k, &v).unwrap();
        for i in 0..3 {
            assert_eq!(out.row(i), v.row(0));
        }
    }

    #[test]
    fn key_permutation_invariance_and_query_equivariance() {
        let mut r = rng::stream(3, 0);
        let (q, k, v) = (
            random(&mut r, 6, 4),
            random(&mut r, 5, 4),
            random(&mut r, 5, 4),
        );
        let base = attention(&q, &k, &v).unwrap();
        let mut perm: Vec<usize> = (0..5).collect();
        perm.shuffle(&mut r);
        let pk = Tensor::from_vec(5, 4, perm.iter().flat_map(|&i| k.row(i).to_vec()).collect());
        let pv = Tensor::from_vec(5, 4, perm.iter().flat_map(|&i| v.row(i).to_vec()).collect());
        assert!(attention(&q, &pk, &pv).unwrap().max_abs_diff(&base) < 1e-6);
        let mut qp: Vec<usize> = (0..6).collect();
        qp.shuffle(&mut r);
        let pq = Tensor::from_vec(6, 4, qp.iter().flat_map(|&i| q.row(i).to_vec()).collect());
        let out = attention(&pq, &k, &v).unwrap();
        for (row, &src) in qp.iter().enumerate() {
            assert_eq!(out.row(row), base.row(src));
        }
    }

    #[test]
    fn all_true_masks_reduce_to_plain_attention() {
        let mut r = rng::stream(4, 0);
        let (q, k, v) = (
            random(&mut r, 4, 6),
            random(&mut r, 5, 6),
            random(&mut r, 5, 6),
        );
        let ks = KeySets::dense(vec![true; 4], vec![true; 5]);
        let a = masked_attention(&q, &k, &v, &ks, 1).unwrap();
        assert!(a.max_abs_diff(&attention(&q, &k, &v).unwrap()) < 1e-12);
    }

    #[test]
    fn masked_rows_are_zero_and_singletons_pass_through() {
        let mut r = rng::stream(5, 0);
        let (q, k, v) = (
            random(&mut r, 3, 4),
            random(&mut r, 4, 4),
            random(&mut r, 4, 4),
        );
        let ks = KeySets::new(
            vec![0, 4, 8, 12],
            (0..3).flat_map(|_| 0..4).collect(),
            vec![true, false, true],
            vec![false, false, true, false],
        )
        .unwrap();
        let out = masked_attention(&q, &k, &v, &ks, 2).unwrap();
        assert_eq!(out.row(0), v.row(2));
        assert!(out.row(1).iter().all(|&x| x == 0.0));
        let none = KeySets::dense(vec![true; 3], vec![false; 4]);
        assert!(masked_attention(&q, &k, &v, &none, 2)
            .unwrap()
            .data()
            .iter()
            .all(|&x| x == 0.0));
    }

    #[test]
    fn shape_errors() {
        let z = Tensor::<f64>::zeros(2, 4);
        let z3 = Tensor::<f64>::zeros(2, 3);
        assert!(attention(&z, &z3, &z).is_err());
        let ks = KeySets::dense(vec![true; 2], vec![true; 2]);
        assert!(masked_attention(&z, &z, &z, &ks, 3).is_err());
        assert!(KeySets::new(vec![0, 2], vec![0, 5], vec![true], vec![true; 3]).is_err());
    }
}
