use super::Var;
use crate::error::{dim_err, Result};

/// Fused gate parameters of one LSTM cell.
///
/// `weight` is `[(hidden + input) × 4·hidden]` acting on the concatenation
/// `[h_prev, x]`; gate blocks along the output axis are ordered forget,
/// input, candidate, output.
#[derive(Clone, Copy)]
pub struct LstmWeights<'t> {
    pub weight: Var<'t>,
    pub bias: Var<'t>,
}

impl<'t> LstmWeights<'t> {
    pub fn hidden(&self) -> usize {
        self.bias.shape()[0] / 4
    }

    pub fn input(&self) -> usize {
        self.weight.shape()[0] - self.hidden()
    }
}

/// One LSTM step over a batch: `x` is `[b×input]`, `h_prev`/`c_prev` are
/// `[b×hidden]`. Returns `(h, c)`.
pub fn lstm_cell<'t>(
    x: Var<'t>,
    h_prev: Var<'t>,
    c_prev: Var<'t>,
    w: &LstmWeights<'t>,
) -> Result<(Var<'t>, Var<'t>)> {
    let ws = w.weight.shape();
    let bs = w.bias.shape();
    if ws.len() != 2 || bs.len() != 1 || !bs[0].is_multiple_of(4) || ws[1] != bs[0] {
        return dim_err(format!("lstm weight {ws:?} with bias {bs:?}"));
    }
    let d = bs[0] / 4;
    let (xs, hs, cs) = (x.shape(), h_prev.shape(), c_prev.shape());
    if xs.len() != 2
        || hs != [xs[0], d]
        || cs != [xs[0], d]
        || ws[0] != d + xs[1]
    {
        return dim_err(format!(
            "lstm cell x {xs:?}, h {hs:?}, c {cs:?} against weight {ws:?}"
        ));
    }
    let hx = Var::concat(&[h_prev, x], 1)?;
    let gates = hx.matmul(w.weight)?.add(w.bias)?;
    let f = gates.slice(1, 0, d)?.sigmoid();
    let i = gates.slice(1, d, d)?.sigmoid();
    let g = gates.slice(1, 2 * d, d)?.tanh();
    let o = gates.slice(1, 3 * d, d)?.sigmoid();
    let c = f.mul(c_prev)?.add(i.mul(g)?)?;
    let h = o.mul(c.tanh())?;
    Ok((h, c))
}
