use super::RetrievalError;

/// Fraction of queries whose first correct result ranks within the top `k`.
pub fn success_rate_at_k(franks: &[usize], k: usize) -> Result<f64, RetrievalError> {
    check(franks)?;
    let hits = franks.iter().filter(|&&f| f <= k).count();
    Ok(hits as f64 / franks.len() as f64)
}

/// Mean reciprocal rank.
pub fn mrr(franks: &[usize]) -> Result<f64, RetrievalError> {
    check(franks)?;
    Ok(franks.iter().map(|&f| 1.0 / f as f64).sum::<f64>() / franks.len() as f64)
}

fn check(franks: &[usize]) -> Result<(), RetrievalError> {
    if franks.is_empty() {
        return Err(RetrievalError::EmptyQuerySet);
    }
    if franks.contains(&0) {
        return Err(RetrievalError::InvalidRank);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert!((success_rate_at_k(&[1, 2, 4], 1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(success_rate_at_k(&[1, 2, 4], 4).unwrap(), 1.0);
        assert_eq!(success_rate_at_k(&[5], 1).unwrap(), 0.0);
        assert_eq!(mrr(&[1]).unwrap(), 1.0);
        assert!((mrr(&[1, 2, 4]).unwrap() - 0.58333).abs() < 1e-5);
        assert!((mrr(&[1, 2, 4]).unwrap() - 7.0 / 12.0).abs() < 1e-9);
        assert_eq!(mrr(&[2, 2]).unwrap(), 0.5);
        assert!(matches!(mrr(&[]), Err(RetrievalError::EmptyQuerySet)));
    }
}
