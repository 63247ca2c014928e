use std::cmp::Ordering;

use thiserror::Error;

use crate::table::Value;

/// Sort class: numbers, then text, then everything without an order.
fn rank(v: &Value) -> u8 {
    match v {
        Value::Number(n) if !n.is_nan() => 0,
        Value::Bool(_) => 0,
        Value::Text(_) => 1,
        _ => 2,
    }
}

fn compare(a: &Value, b: &Value, descending: bool) -> Ordering {
    let (ra, rb) = (rank(a), rank(b));
    if ra != rb {
        return ra.cmp(&rb);
    }
    let o = match (a, b) {
        (Value::Text(x), Value::Text(y)) => x.cmp(y),
        _ if ra == 0 => a.as_number().total_cmp(&b.as_number()),
        _ => Ordering::Equal,
    };
    if descending {
        o.reverse()
    } else {
        o
    }
}

/// Stable permutation ordering `keys`. Unorderable keys (NaN, Null, lists)
/// always come last in input order.
pub fn sort_order(keys: &[Value], descending: bool) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| compare(&keys[a], &keys[b], descending));
    idx
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OrderError {
    #[error("must be a list of indices, got {0}")]
    NotAList(&'static str),
    #[error("has {got} entries for {expected} elements")]
    Length { got: usize, expected: usize },
    #[error("entry {0} is not a valid index")]
    NotAnIndex(String),
    #[error("repeats index {0}")]
    Duplicate(usize),
    #[error("is missing index {0}")]
    Missing(usize),
}

/// Checks that an `Order` result is a permutation of `0..m`.
pub fn order_from_result(v: &Value, m: usize) -> Result<Vec<usize>, OrderError> {
    let Value::List(items) = v else {
        return Err(OrderError::NotAList(v.type_name()));
    };
    let mut seen = vec![false; m];
    let mut out = Vec::with_capacity(items.len());
    for item in items.iter() {
        let n = item.as_number();
        if !(n >= 0.0 && n.fract() == 0.0 && (n as usize) < m) {
            return Err(OrderError::NotAnIndex(item.to_string()));
        }
        let i = n as usize;
        if seen[i] {
            return Err(OrderError::Duplicate(i));
        }
        seen[i] = true;
        out.push(i);
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(OrderError::Missing(missing));
    }
    if out.len() != m {
        return Err(OrderError::Length {
            got: out.len(),
            expected: m,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nums(v: &[f64]) -> Vec<Value> {
        v.iter().map(|&x| Value::Number(x)).collect()
    }

    #[test]
    fn ascending_by_value() {
        assert_eq!(sort_order(&nums(&[3.0, 1.0, 2.0]), false), vec![1, 2, 0]);
    }

    #[test]
    fn equal_keys_keep_input_order() {
        assert_eq!(sort_order(&nums(&[5.0, 5.0]), false), vec![0, 1]);
        assert_eq!(sort_order(&nums(&[5.0, 5.0]), true), vec![0, 1]);
    }

    #[test]
    fn missing_values_sort_last_either_way() {
        let keys = vec![
            Value::Null,
            Value::Number(2.0),
            Value::Number(f64::NAN),
            Value::Number(1.0),
        ];
        assert_eq!(sort_order(&keys, false), vec![3, 1, 0, 2]);
        assert_eq!(sort_order(&keys, true), vec![1, 3, 0, 2]);
    }

    #[test]
    fn text_after_numbers() {
        let keys = vec![Value::text("b"), Value::Number(9.0), Value::text("a")];
        assert_eq!(sort_order(&keys, false), vec![1, 2, 0]);
    }

    #[test]
    fn permutations_are_checked() {
        let l = |v: &[f64]| Value::list(nums(v));
        assert_eq!(
            order_from_result(&l(&[2.0, 0.0, 1.0]), 3).unwrap(),
            vec![2, 0, 1]
        );
        assert_eq!(
            order_from_result(&l(&[0.0, 0.0, 1.0]), 3),
            Err(OrderError::Duplicate(0))
        );
        assert_eq!(
            order_from_result(&l(&[0.0, 1.0]), 3),
            Err(OrderError::Missing(2))
        );
        assert!(matches!(
            order_from_result(&l(&[0.0, 3.0, 1.0]), 3),
            Err(OrderError::NotAnIndex(_))
        ));
        assert!(matches!(
            order_from_result(&l(&[0.5]), 1),
            Err(OrderError::NotAnIndex(_))
        ));
        assert_eq!(
            order_from_result(&Value::Number(1.0), 1),
            Err(OrderError::NotAList("number"))
        );
        assert_eq!(order_from_result(&l(&[]), 0).unwrap(), Vec::<usize>::new());
    }
}
