//! Messages exchanged between robots and the synchronous bus that carries them.

use crate::geometry::{Cell, Point2};
use crate::gp::{fit_gp, GpError, GpModel, Kernel};
use crate::rloc::RobotId;
use serde::{Deserialize, Serialize};

/// Training set plus kernel: enough to rebuild the sender's model exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpShare {
    pub inputs: Vec<Point2>,
    pub targets: Vec<f64>,
    pub kernel: Kernel,
}

impl GpShare {
    pub fn from_model(model: &GpModel) -> Self {
        Self {
            inputs: model.inputs().to_vec(),
            targets: model.targets().to_vec(),
            kernel: *model.kernel(),
        }
    }

    pub fn rebuild(&self) -> Result<GpModel, GpError> {
        let samples: Vec<(Point2, f64)> = self.inputs.iter().copied().zip(self.targets.iter().copied()).collect();
        fit_gp(&samples, self.kernel)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Beacon {
    /// Sender's own position estimate for the delivery step.
    pub position: Point2,
    /// RSSI the sender heard from other robots, relayed for the range graph.
    pub heard: Vec<(RobotId, f64)>,
    /// Filled in by the bus with the power measured at the receiver.
    pub rssi_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MessageKind {
    GpShare(GpShare),
    RssiBeacon(Beacon),
    /// Claimed goal and whether the sender has run out of frontier.
    HullShare { goal: Option<Cell>, done: bool },
}

impl MessageKind {
    fn order(&self) -> u8 {
        match self {
            MessageKind::RssiBeacon(_) => 0,
            MessageKind::GpShare(_) => 1,
            MessageKind::HullShare { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub sender: RobotId,
    pub step: usize,
    pub kind: MessageKind,
}

/// Broadcast bus with lockstep delivery. A message reaches every robot whose
/// link to the sender is up; inboxes are ordered by (sender, kind).
#[derive(Debug, Clone, Default)]
pub struct Bus {
    pending: Vec<Message>,
}

impl Bus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn post(&mut self, messages: impl IntoIterator<Item = Message>) {
        self.pending.extend(messages);
    }

    pub fn pending(&self) -> &[Message] {
        &self.pending
    }

    /// Delivers everything posted so far. `link(from, to)` returns the RSSI
    /// at `to` when the link is up, `None` otherwise.
    pub fn deliver(&mut self, robots: &[RobotId], mut link: impl FnMut(RobotId, RobotId) -> Option<f64>) -> Vec<Vec<Message>> {
        let mut pending = std::mem::take(&mut self.pending);
        pending.sort_by(|a, b| a.sender.cmp(&b.sender).then(a.kind.order().cmp(&b.kind.order())));
        let mut inboxes = vec![Vec::new(); robots.len()];
        for (slot, &to) in robots.iter().enumerate() {
            for m in &pending {
                if m.sender == to {
                    continue;
                }
                let Some(rssi) = link(m.sender, to) else { continue };
                let mut m = m.clone();
                if let MessageKind::RssiBeacon(b) = &mut m.kind {
                    b.rssi_dbm = rssi;
                }
                inboxes[slot].push(m);
            }
        }
        inboxes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beacon(sender: RobotId) -> Message {
        Message {
            sender,
            step: 0,
            kind: MessageKind::RssiBeacon(Beacon {
                position: Point2::default(),
                heard: Vec::new(),
                rssi_dbm: 0.0,
            }),
        }
    }

    #[test]
    fn delivery_respects_links_and_order() {
        let mut bus = Bus::new();
        bus.post([
            Message {
                sender: 2,
                step: 0,
                kind: MessageKind::HullShare { goal: None, done: false },
            },
            beacon(2),
            beacon(0),
        ]);
        let inboxes = bus.deliver(&[0, 1, 2], |from, to| (from + to != 2).then_some(-50.0 - to as f64));
        // 0 -> 2 is down, 2 -> 0 is down
        assert!(inboxes[0].is_empty());
        assert_eq!(inboxes[1].len(), 3);
        assert_eq!(inboxes[1][0].sender, 0);
        assert!(matches!(inboxes[1][1].kind, MessageKind::RssiBeacon(ref b) if b.rssi_dbm == -51.0));
        assert!(matches!(inboxes[1][2].kind, MessageKind::HullShare { .. }));
        assert!(inboxes[2].is_empty());
        assert!(bus.pending().is_empty());
    }

    #[test]
    fn gp_share_rebuilds_exactly() {
        let samples = vec![(Point2::new(0.0, 0.0), 0.2), (Point2::new(1.0, 0.5), 0.9)];
        let m = fit_gp(&samples, Kernel::default()).unwrap();
        let r = GpShare::from_model(&m).rebuild().unwrap();
        let q = [Point2::new(0.4, 0.1)];
        assert_eq!(m.predict(&q), r.predict(&q));
    }
}
