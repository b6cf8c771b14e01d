//! Objectives with closed-form derivatives, for checking the meta-gradient
//! machinery.

use crate::error::{Error, Result};

use super::MetaObjective;

fn same_len(params: &[f64], batch: &[f64]) -> Result<()> {
    if params.len() == batch.len() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected: params.len(), found: batch.len() })
    }
}

/// `L(θ) = Σⱼ (θⱼ - aⱼ)²`; the batch is the centre `a`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Quadratic;

impl MetaObjective for Quadratic {
    type Batch = Vec<f64>;

    fn loss(&self, params: &[f64], batch: &Vec<f64>) -> Result<f64> {
        same_len(params, batch)?;
        Ok(params.iter().zip(batch).map(|(t, a)| (t - a) * (t - a)).sum())
    }

    fn gradient(&self, params: &[f64], batch: &Vec<f64>) -> Result<(f64, Vec<f64>)> {
        let loss = self.loss(params, batch)?;
        Ok((loss, params.iter().zip(batch).map(|(t, a)| 2.0 * (t - a)).collect()))
    }

    fn hessian_vector(&self, params: &[f64], batch: &Vec<f64>, v: &[f64]) -> Result<Vec<f64>> {
        same_len(params, batch)?;
        Ok(v.iter().map(|x| 2.0 * x).collect())
    }
}

/// `L(θ) = Σⱼ cⱼ θⱼ`; the batch is the coefficient vector `c`. Zero Hessian.
#[derive(Clone, Copy, Debug, Default)]
pub struct LinearToy;

impl MetaObjective for LinearToy {
    type Batch = Vec<f64>;

    fn loss(&self, params: &[f64], batch: &Vec<f64>) -> Result<f64> {
        same_len(params, batch)?;
        Ok(params.iter().zip(batch).map(|(t, c)| t * c).sum())
    }

    fn gradient(&self, params: &[f64], batch: &Vec<f64>) -> Result<(f64, Vec<f64>)> {
        Ok((self.loss(params, batch)?, batch.clone()))
    }

    fn hessian_vector(&self, params: &[f64], batch: &Vec<f64>, v: &[f64]) -> Result<Vec<f64>> {
        same_len(params, batch)?;
        Ok(vec![0.0; v.len()])
    }
}
