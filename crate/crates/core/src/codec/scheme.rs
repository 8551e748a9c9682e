use crate::channel::ChannelMatrix;
use crate::directions::{
    build_closure_map, stream_directions, stream_interference_directions, ClosureMap, DirectionTable, LinkShape,
    StreamDirectionParams,
};
use crate::dofregion::StreamPlan;
use crate::error::{Error, Result};

/// Per-stream transmit and interference tables for one channel, plus the
/// shared closure map. Stream `l` uses constant `deltas[l]`.
#[derive(Debug, Clone)]
pub struct SchemeDirections {
    pub n: u32,
    pub transmit: Vec<DirectionTable>,
    pub interference: Vec<DirectionTable>,
    pub closure: ClosureMap,
    pub plan: StreamPlan,
}

impl SchemeDirections {
    pub fn build(h: &ChannelMatrix, n: u32, plan: &StreamPlan, deltas: &StreamDirectionParams) -> Result<Self> {
        if plan.streams.len() != h.users() {
            return Err(Error::Dimension(format!(
                "plan has {} users, channel has {}",
                plan.streams.len(),
                h.users()
            )));
        }
        let streams = plan.max_streams().max(1) as usize;
        if deltas.len() < streams {
            return Err(Error::InvalidConfig(format!(
                "{} stream constants for {streams} streams",
                deltas.len()
            )));
        }
        let mut transmit = Vec::with_capacity(streams);
        let mut interference = Vec::with_capacity(streams);
        for (l, &delta) in deltas.deltas.iter().take(streams).enumerate() {
            transmit.push(stream_directions(l, delta, h, n)?);
            interference.push(stream_interference_directions(l, delta, h, n)?);
        }
        let closure = build_closure_map(&transmit[0], &interference[0])?;
        Ok(SchemeDirections {
            n,
            transmit,
            interference,
            closure,
            plan: plan.clone(),
        })
    }

    pub fn shape(&self) -> LinkShape {
        self.transmit[0].shape()
    }

    /// `D`
    pub fn d(&self) -> usize {
        self.transmit[0].len()
    }

    /// `D'`
    pub fn d_prime(&self) -> usize {
        self.interference[0].len()
    }

    pub fn delta(&self, l: usize) -> f64 {
        self.transmit[l].delta()
    }

    /// Symbols carried by user `k`: `M * d_bar_k * D`.
    pub fn symbols_per_user(&self, k: usize) -> usize {
        self.shape().tx * self.plan.streams[k] as usize * self.d()
    }

    /// Worst-case `sum_l delta_l sum_i |T_{l,i}|` over users, per unit symbol.
    pub fn peak_amplitude(&self) -> f64 {
        self.plan
            .streams
            .iter()
            .map(|&s| {
                let s = s as usize;
                let per_stream = (0..s)
                    .map(|l| self.delta(l) * self.transmit[l].values().iter().map(|v| v.abs()).sum::<f64>())
                    .fold(0.0, f64::max);
                s as f64 * per_stream
            })
            .fold(0.0, f64::max)
    }
}
