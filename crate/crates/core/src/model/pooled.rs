use super::{FlowLayout, ModelError, VarKind, VarMap};

/// Rewrites a solution of the pooled layout in the pairwise layout `full`.
///
/// Per slot, each EV's net V2V position (sent − received) is matched greedily
/// in fleet order: net senders fill net receivers one after another. No flow
/// exceeds its sender's total, so pair caps at or above the discharge rate
/// hold. A self-loop (an EV both sending and receiving in one slot) is dropped;
/// with integral exclusivity binaries that never happens beyond round-off.
pub fn expand_pooled(x: &[f64], pooled: &VarMap, full: &VarMap) -> Result<Vec<f64>, ModelError> {
    if pooled.layout != FlowLayout::Pooled || full.layout != FlowLayout::Pairwise {
        return Err(ModelError::LayoutMismatch);
    }
    let mut out = vec![0.0; full.num_columns()];
    for (c, info) in full.columns().iter().enumerate() {
        if info.kind != VarKind::Flow {
            out[c] = x[pooled.lookup(info.kind, info.ev, info.slot, None)?];
        }
    }
    if !full.mode.allows_v2v() {
        return Ok(out);
    }
    let slots = (0..full.num_evs())
        .filter_map(|i| full.ev_slots(i).last().map(|(t, _)| t + 1))
        .max()
        .unwrap_or(0);
    for t in 0..slots {
        let mut senders = Vec::new();
        let mut receivers = Vec::new();
        for i in 0..pooled.num_evs() {
            let Some(v) = pooled.slot_vars(i, t) else { continue };
            let sent = v.send.map_or(0.0, |c| x[c].max(0.0));
            let recv = v.receive.map_or(0.0, |c| x[c].max(0.0));
            let overlap = sent.min(recv);
            if overlap > 1e-9 {
                log::debug!(
                    "slot {t}: EV {} both sends and receives {overlap:.3e} kWh",
                    pooled.ev_id(i)
                );
            }
            let net = sent - recv;
            if net > 0.0 {
                senders.push((i, net));
            } else if net < 0.0 {
                receivers.push((i, -net));
            }
        }
        let mut k = 0;
        for (from, mut left) in senders {
            while left > 0.0 && k < receivers.len() {
                let (to, ref mut want) = receivers[k];
                let f = left.min(*want);
                out[full.lookup(VarKind::Flow, from, t, Some(to))?] += f;
                left -= f;
                *want -= f;
                if *want <= 0.0 {
                    k += 1;
                }
            }
        }
    }
    Ok(out)
}
