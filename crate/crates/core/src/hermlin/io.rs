use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{LinalgError, Operator, Result};

/// On-disk form of an [`Operator`]: `{"dims": [..], "re": [[..]], "im": [[..]]}`,
/// row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorFile {
    pub dims: Vec<usize>,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&Operator> for OperatorFile {
    fn from(op: &Operator) -> Self {
        let n = op.dim();
        let row = |r: usize, f: fn(Complex64) -> f64| (0..n).map(|c| f(op.get(r, c))).collect();
        Self {
            dims: op.dims().to_vec(),
            re: (0..n).map(|r| row(r, |z| z.re)).collect(),
            im: (0..n).map(|r| row(r, |z| z.im)).collect(),
        }
    }
}

impl From<Operator> for OperatorFile {
    fn from(op: Operator) -> Self {
        Self::from(&op)
    }
}

impl TryFrom<OperatorFile> for Operator {
    type Error = LinalgError;

    fn try_from(f: OperatorFile) -> Result<Operator> {
        if f.dims.is_empty() || f.dims.contains(&0) {
            return Err(LinalgError::Parse(format!("invalid dims {:?}", f.dims)));
        }
        let n: usize = f.dims.iter().product();
        let square = |rows: &Vec<Vec<f64>>| rows.len() == n && rows.iter().all(|r| r.len() == n);
        if !square(&f.re) || !square(&f.im) {
            return Err(LinalgError::Parse(format!("expected {n}x{n} re/im arrays for dims {:?}", f.dims)));
        }
        let data =
            f.re.iter().zip(&f.im).flat_map(|(r, i)| r.iter().zip(i).map(|(&a, &b)| Complex64::new(a, b))).collect();
        Operator::new(&f.dims, data)
    }
}

impl Operator {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&OperatorFile::from(self)).expect("operator serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: OperatorFile = serde_json::from_str(text).map_err(|e| LinalgError::Parse(e.to_string()))?;
        Operator::try_from(f)
    }
}

#[cfg(test)]
mod tests {
    use super::super::random::random_operator;
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn schema_keys() {
        let op = Operator::identity(&[2]);
        let v: serde_json::Value = serde_json::from_str(&op.to_json()).unwrap();
        assert_eq!(v["dims"], serde_json::json!([2]));
        assert_eq!(v["re"], serde_json::json!([[1.0, 0.0], [0.0, 1.0]]));
        assert_eq!(v["im"], serde_json::json!([[0.0, 0.0], [0.0, 0.0]]));
    }

    #[test]
    fn reader_validates_shape() {
        let bad = r#"{"dims":[2,2],"re":[[1,0],[0,1]],"im":[[0,0],[0,0]]}"#;
        assert!(matches!(Operator::from_json(bad), Err(LinalgError::Parse(_))));
        let ragged = r#"{"dims":[2],"re":[[1,0],[0]],"im":[[0,0],[0,0]]}"#;
        assert!(Operator::from_json(ragged).is_err());
    }

    proptest! {
        #[test]
        fn json_round_trip(seed in any::<u64>(), d1 in 1usize..4, d2 in 1usize..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let op = random_operator(&mut rng, &[d1, d2]);
            let back = Operator::from_json(&op.to_json()).unwrap();
            prop_assert_eq!(back, op);
        }
    }
}
