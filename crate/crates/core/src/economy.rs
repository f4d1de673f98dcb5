//! Input-output accounting state, Leontief algebra and network surgery.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{identity_minus, Lu};

/// Any entry of the Leontief inverse below this value signals a violation of
/// the Hawkins-Simon condition.
pub const PRODUCTIVITY_FLOOR: f64 = -1e-10;

/// Accounting state of an economy.
///
/// `z[[i, j]]` is the value of goods sold by industry `i` to industry `j`.
/// Gross output `x` and value added `v` are derived from the flows and final
/// demand so that `x = Z i + f = Z' i + v` holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Economy {
    labels: Vec<String>,
    z: Array2<f64>,
    f: Array1<f64>,
    x: Array1<f64>,
    v: Array1<f64>,
}

impl Economy {
    /// Builds an economy with generated labels `S1..Sn`.
    pub fn build(z: Array2<f64>, f: Array1<f64>) -> Result<Economy> {
        let labels = (1..=f.len()).map(|i| format!("S{i}")).collect();
        Economy::with_labels(labels, z, f)
    }

    pub fn with_labels(labels: Vec<String>, z: Array2<f64>, f: Array1<f64>) -> Result<Economy> {
        let n = f.len();
        if z.nrows() != n {
            return Err(Error::DimensionMismatch {
                what: "flow matrix rows",
                expected: n,
                found: z.nrows(),
            });
        }
        if z.ncols() != n {
            return Err(Error::DimensionMismatch {
                what: "flow matrix columns",
                expected: n,
                found: z.ncols(),
            });
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                what: "industry labels",
                expected: n,
                found: labels.len(),
            });
        }
        for ((i, j), &value) in z.indexed_iter() {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::NegativeEntry {
                    location: format!("Z[{},{}] ({} -> {})", i + 1, j + 1, labels[i], labels[j]),
                    value,
                });
            }
        }
        for (i, &value) in f.iter().enumerate() {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::NegativeEntry {
                    location: format!("f[{}] ({})", i + 1, labels[i]),
                    value,
                });
            }
        }
        let x = z.sum_axis(Axis(1)) + &f;
        let v = &x - &z.sum_axis(Axis(0));
        Ok(Economy { labels, z, f, x, v })
    }

    pub fn n(&self) -> usize {
        self.f.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn flows(&self) -> &Array2<f64> {
        &self.z
    }

    pub fn final_demand(&self) -> &Array1<f64> {
        &self.f
    }

    pub fn gross_output(&self) -> &Array1<f64> {
        &self.x
    }

    pub fn value_added(&self) -> &Array1<f64> {
        &self.v
    }

    /// True when some industry buys more intermediate inputs than it produces.
    pub fn has_negative_value_added(&self) -> bool {
        self.v.iter().any(|&v| v < 0.0)
    }

    pub fn total_output(&self) -> f64 {
        self.x.sum()
    }

    pub fn total_consumption(&self) -> f64 {
        self.f.sum()
    }

    /// Fraction of the n² possible links carrying a strictly positive flow.
    pub fn density(&self) -> f64 {
        let n = self.n();
        if n == 0 {
            return 0.0;
        }
        self.link_count() as f64 / (n * n) as f64
    }

    pub fn link_count(&self) -> usize {
        self.z.iter().filter(|&&v| v > 0.0).count()
    }

    /// Positive links in row-major order.
    pub fn positive_links(&self) -> Vec<(usize, usize)> {
        self.z
            .indexed_iter()
            .filter(|(_, &v)| v > 0.0)
            .map(|(ij, _)| ij)
            .collect()
    }

    /// Stable digest of the flows and final demand.
    pub fn fingerprint(&self) -> u64 {
        let mut hasher = Sha256::new();
        hasher.update((self.n() as u64).to_le_bytes());
        for v in self.z.iter().chain(self.f.iter()) {
            hasher.update(v.to_bits().to_le_bytes());
        }
        let digest = hasher.finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
    }

    /// Removes the given links and rebalances the accounts.
    ///
    /// Suppliers lose gross output equal to the removed sales; the customers'
    /// output stays put and the missing input value moves into value added.
    pub fn remove_links(&self, links: &[(usize, usize)]) -> Economy {
        let n = self.n();
        let mut z = self.z.clone();
        for &(i, j) in links {
            assert!(i < n && j < n, "link ({i}, {j}) out of range for n = {n}");
            z[[i, j]] = 0.0;
        }
        if z == self.z {
            return self.clone();
        }
        Economy::with_labels(self.labels.clone(), z, self.f.clone())
            .expect("removing links keeps a valid economy")
    }

    /// The `k` smallest positive links, ascending by size; ties by (row, column).
    pub fn smallest_links(&self, k: usize) -> Result<Vec<(usize, usize)>> {
        let mut links = self.positive_links();
        if k > links.len() {
            return Err(Error::KTooLarge {
                requested: k,
                available: links.len(),
            });
        }
        links.sort_by(|&a, &b| {
            self.z[a]
                .partial_cmp(&self.z[b])
                .expect("flows are finite")
                .then(a.cmp(&b))
        });
        links.truncate(k);
        Ok(links)
    }
}

/// Technical coefficients and Leontief inverse of an economy.
#[derive(Debug, Clone)]
pub struct LeontiefOperator {
    a: Array2<f64>,
    l: Array2<f64>,
    source: u64,
}

impl LeontiefOperator {
    pub fn from_economy(e: &Economy) -> Result<LeontiefOperator> {
        let n = e.n();
        let x = e.gross_output();
        let z = e.flows();
        let mut a = Array2::zeros((n, n));
        for j in 0..n {
            let column = z.column(j);
            if x[j] > 0.0 {
                a.column_mut(j).assign(&column.mapv(|zij| zij / x[j]));
            } else if column.iter().any(|&zij| zij != 0.0) {
                return Err(Error::ZeroOutputWithInputs { industry: j });
            }
        }
        let lu = Lu::factor(identity_minus(a.view()).view())
            .ok_or_else(|| Error::NonProductive("I - A is numerically singular".into()))?;
        let l = lu.inverse();
        if let Some(((i, j), v)) = l.indexed_iter().find(|(_, &v)| v < PRODUCTIVITY_FLOOR) {
            return Err(Error::NonProductive(format!(
                "Leontief inverse entry L[{},{}] = {v:e} is negative",
                i + 1,
                j + 1
            )));
        }
        Ok(LeontiefOperator {
            a,
            l,
            source: e.fingerprint(),
        })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn coefficients(&self) -> &Array2<f64> {
        &self.a
    }

    pub fn inverse(&self) -> &Array2<f64> {
        &self.l
    }

    pub fn source_fingerprint(&self) -> u64 {
        self.source
    }

    /// Total (direct plus indirect) demand `L f` implied by final demand `f`.
    pub fn total_demand(&self, f: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if f.len() != self.n() {
            return Err(Error::DimensionMismatch {
                what: "consumption vector",
                expected: self.n(),
                found: f.len(),
            });
        }
        Ok(self.l.dot(&f))
    }

    /// Final demand `(I - A) x` that output `x` leaves after intermediate use.
    pub fn net_output(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        &x - &self.a.dot(&x)
    }
}

/// Convenience wrapper matching the free-function style of the other modules.
pub fn coefficients(e: &Economy) -> Result<LeontiefOperator> {
    LeontiefOperator::from_economy(e)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EconomyMetrics {
    pub avg_multiplier: f64,
    pub intermediate_share: f64,
    pub total_output: f64,
    pub total_consumption: f64,
    pub density: f64,
}

pub fn metrics(e: &Economy, op: &LeontiefOperator) -> EconomyMetrics {
    let n = e.n();
    let total_output = e.total_output();
    EconomyMetrics {
        avg_multiplier: if n == 0 {
            0.0
        } else {
            op.inverse().sum() / n as f64
        },
        intermediate_share: if total_output > 0.0 {
            e.flows().sum() / total_output
        } else {
            0.0
        },
        total_output,
        total_consumption: e.total_consumption(),
        density: e.density(),
    }
}
