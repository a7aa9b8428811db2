//! Datasets: finite subsets of the universe `[u] = {0, .., u-1}`.
//!
//! Small datasets (every element below 64) live in a single `u64` bitset; anything
//! larger falls back to a sorted vector. The representation is canonical, so the
//! derived equality and hashing agree with set equality.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// An element of the universe.
pub type Elem = u32;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Repr {
    Bits(u64),
    Sorted(Vec<Elem>),
}

/// A subset of `[u]`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Dataset {
    repr: Repr,
}

impl Default for Dataset {
    fn default() -> Self {
        Self::new()
    }
}

impl Dataset {
    pub const fn new() -> Self {
        Dataset { repr: Repr::Bits(0) }
    }

    /// Builds the dataset whose bitset is `mask` (bit `i` set means `i` is present).
    pub const fn from_mask(mask: u64) -> Self {
        Dataset { repr: Repr::Bits(mask) }
    }

    /// Returns the bitset view when every element is below 64.
    pub fn as_mask(&self) -> Option<u64> {
        match self.repr {
            Repr::Bits(m) => Some(m),
            Repr::Sorted(_) => None,
        }
    }

    pub fn len(&self) -> usize {
        match &self.repr {
            Repr::Bits(m) => m.count_ones() as usize,
            Repr::Sorted(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, x: Elem) -> bool {
        match &self.repr {
            Repr::Bits(m) => x < 64 && m & (1u64 << x) != 0,
            Repr::Sorted(v) => v.binary_search(&x).is_ok(),
        }
    }

    /// Inserts `x`; returns `true` if it was not already present.
    pub fn insert(&mut self, x: Elem) -> bool {
        match &mut self.repr {
            Repr::Bits(m) if x < 64 => {
                let fresh = *m & (1u64 << x) == 0;
                *m |= 1u64 << x;
                fresh
            }
            Repr::Bits(m) => {
                let mut v: Vec<Elem> = mask_elems(*m).collect();
                v.push(x);
                self.repr = Repr::Sorted(v);
                true
            }
            Repr::Sorted(v) => match v.binary_search(&x) {
                Ok(_) => false,
                Err(pos) => {
                    v.insert(pos, x);
                    true
                }
            },
        }
    }

    /// Removes `x`; returns `true` if it was present.
    pub fn remove(&mut self, x: Elem) -> bool {
        let removed = match &mut self.repr {
            Repr::Bits(m) => {
                let present = x < 64 && *m & (1u64 << x) != 0;
                if present {
                    *m &= !(1u64 << x);
                }
                present
            }
            Repr::Sorted(v) => match v.binary_search(&x) {
                Ok(pos) => {
                    v.remove(pos);
                    true
                }
                Err(_) => false,
            },
        };
        self.normalize();
        removed
    }

    fn normalize(&mut self) {
        if let Repr::Sorted(v) = &self.repr {
            if v.last().is_none_or(|&max| max < 64) {
                let mask = v.iter().fold(0u64, |m, &x| m | (1u64 << x));
                self.repr = Repr::Bits(mask);
            }
        }
    }

    /// Elements in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = Elem> + '_ {
        let (bits, sorted) = match &self.repr {
            Repr::Bits(m) => (Some(mask_elems(*m)), None),
            Repr::Sorted(v) => (None, Some(v.iter().copied())),
        };
        bits.into_iter().flatten().chain(sorted.into_iter().flatten())
    }

    pub fn to_vec(&self) -> Vec<Elem> {
        self.iter().collect()
    }

    pub fn max_elem(&self) -> Option<Elem> {
        match &self.repr {
            Repr::Bits(0) => None,
            Repr::Bits(m) => Some(63 - m.leading_zeros()),
            Repr::Sorted(v) => v.last().copied(),
        }
    }

    pub fn is_subset(&self, other: &Dataset) -> bool {
        match (&self.repr, &other.repr) {
            (Repr::Bits(a), Repr::Bits(b)) => a & !b == 0,
            _ => self.iter().all(|x| other.contains(x)),
        }
    }

    pub fn union(&self, other: &Dataset) -> Dataset {
        match (&self.repr, &other.repr) {
            (Repr::Bits(a), Repr::Bits(b)) => Dataset::from_mask(a | b),
            _ => self.iter().chain(other.iter()).collect(),
        }
    }

    pub fn intersection(&self, other: &Dataset) -> Dataset {
        match (&self.repr, &other.repr) {
            (Repr::Bits(a), Repr::Bits(b)) => Dataset::from_mask(a & b),
            _ => self.iter().filter(|&x| other.contains(x)).collect(),
        }
    }

    pub fn difference(&self, other: &Dataset) -> Dataset {
        match (&self.repr, &other.repr) {
            (Repr::Bits(a), Repr::Bits(b)) => Dataset::from_mask(a & !b),
            _ => self.iter().filter(|&x| !other.contains(x)).collect(),
        }
    }

    /// The full universe `[u]`.
    pub fn universe(u: u32) -> Dataset {
        if u <= 64 {
            Dataset::from_mask(if u == 64 { u64::MAX } else { (1u64 << u) - 1 })
        } else {
            (0..u).collect()
        }
    }
}

fn mask_elems(mut m: u64) -> impl Iterator<Item = Elem> {
    std::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let x = m.trailing_zeros();
            m &= m - 1;
            Some(x)
        }
    })
}

impl FromIterator<Elem> for Dataset {
    fn from_iter<I: IntoIterator<Item = Elem>>(iter: I) -> Self {
        let mut d = Dataset::new();
        for x in iter {
            d.insert(x);
        }
        d
    }
}

impl<const N: usize> From<[Elem; N]> for Dataset {
    fn from(xs: [Elem; N]) -> Self {
        xs.into_iter().collect()
    }
}

impl fmt::Debug for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, x) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{x}")?;
        }
        f.write_str("}")
    }
}

impl Serialize for Dataset {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for Dataset {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<Elem>::deserialize(d)?;
        Ok(v.into_iter().collect())
    }
}
