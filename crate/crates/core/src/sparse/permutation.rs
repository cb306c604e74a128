use crate::error::{check_len, Error, Result};

/// Bijection on `[0, n)`: `forward[i]` is the new position of old index `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    forward: Vec<usize>,
    inverse: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self {
            forward: (0..n).collect(),
            inverse: (0..n).collect(),
        }
    }

    pub fn from_forward(forward: Vec<usize>) -> Result<Self> {
        let n = forward.len();
        let mut inverse = vec![usize::MAX; n];
        for (i, &f) in forward.iter().enumerate() {
            if f >= n || inverse[f] != usize::MAX {
                return Err(Error::InvalidConfig(format!("not a permutation: position {f} at index {i}")));
            }
            inverse[f] = i;
        }
        Ok(Self { forward, inverse })
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn forward(&self) -> &[usize] {
        &self.forward
    }

    pub fn inverse(&self) -> &[usize] {
        &self.inverse
    }

    /// `out[forward[i]] = x[i]`
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_len("permutation input", self.len(), x.len())?;
        check_len("permutation output", self.len(), out.len())?;
        for (i, &f) in self.forward.iter().enumerate() {
            out[f] = x[i];
        }
        Ok(())
    }

    /// `out[i] = x[forward[i]]`, undoing [`Permutation::apply_into`].
    pub fn apply_inverse_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_len("permutation input", self.len(), x.len())?;
        check_len("permutation output", self.len(), out.len())?;
        for (i, &f) in self.forward.iter().enumerate() {
            out[i] = x[f];
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_bijection() {
        assert!(Permutation::from_forward(vec![0, 0]).is_err());
        assert!(Permutation::from_forward(vec![0, 2]).is_err());
    }

    #[test]
    fn apply_then_inverse() {
        let p = Permutation::from_forward(vec![2, 0, 3, 1]).unwrap();
        let x = [10.0, 11.0, 12.0, 13.0];
        let mut y = [0.0; 4];
        let mut z = [0.0; 4];
        p.apply_into(&x, &mut y).unwrap();
        assert_eq!(y, [11.0, 13.0, 10.0, 12.0]);
        p.apply_inverse_into(&y, &mut z).unwrap();
        assert_eq!(z, x);
        for i in 0..4 {
            assert_eq!(p.inverse()[p.forward()[i]], i);
        }
    }
}
