//! Typed message envelopes with FIPA-style performatives and a simulated
//! transport delivering them between agents with per-link period delays.
//!
//! The transport replaces a real agent platform's nondeterministic scheduling
//! with a reproducible rule: messages come out ordered by sender id, then by
//! send sequence, so identical send sequences always yield identical delivery
//! sequences and no (sender, receiver) pair is ever reordered.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TransportError {
    #[error("no delay configured for link {from:?} -> {to:?}")]
    UnknownLink { from: AgentId, to: AgentId },
}

/// Identity of a simulation participant (market, tier agents, source).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct AgentId(pub u32);

impl std::fmt::Display for AgentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Speech-act type of a message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Performative {
    /// Replenishment order.
    Request,
    /// Price bid in a procurement negotiation.
    Propose,
    AcceptProposal,
    RejectProposal,
    /// Shipment notice or market-demand broadcast.
    Inform,
    /// Fallback-trade confirmation.
    Confirm,
}

/// Message body.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Payload {
    Order { qty: f64 },
    Bid { qty: f64, price: f64, round: u32 },
    BidReply { accepted: bool, threshold_met_price: Option<f64> },
    Shipment { qty: f64, order_ref: u64 },
    DemandBroadcast { qty: f64 },
}

impl Payload {
    pub fn type_name(&self) -> &'static str {
        match self {
            Payload::Order { .. } => "order",
            Payload::Bid { .. } => "bid",
            Payload::BidReply { .. } => "bid_reply",
            Payload::Shipment { .. } => "shipment",
            Payload::DemandBroadcast { .. } => "demand_broadcast",
        }
    }

    pub fn qty(&self) -> Option<f64> {
        match self {
            Payload::Order { qty }
            | Payload::Bid { qty, .. }
            | Payload::Shipment { qty, .. }
            | Payload::DemandBroadcast { qty } => Some(*qty),
            Payload::BidReply { .. } => None,
        }
    }

    pub fn price(&self) -> Option<f64> {
        match self {
            Payload::Bid { price, .. } => Some(*price),
            Payload::BidReply { threshold_met_price, .. } => *threshold_met_price,
            _ => None,
        }
    }
}

/// A performative-tagged envelope on the simulated transport.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Message {
    pub performative: Performative,
    pub sender: AgentId,
    pub receiver: AgentId,
    pub sent_period: u64,
    pub deliver_period: u64,
    pub payload: Payload,
}

impl Message {
    /// New message with the delivery period initially equal to the send
    /// period; [`Transport::send`] applies the link delay.
    pub fn new(
        performative: Performative,
        sender: AgentId,
        receiver: AgentId,
        sent_period: u64,
        payload: Payload,
    ) -> Self {
        Self { performative, sender, receiver, sent_period, deliver_period: sent_period, payload }
    }
}

/// In-process transport with an in-flight queue keyed by delivery period and
/// a per-link delay table.
#[derive(Debug, Default)]
pub struct Transport {
    delays: BTreeMap<(AgentId, AgentId), u64>,
    queue: BTreeMap<u64, Vec<(u64, Message)>>,
    next_seq: u64,
}

impl Transport {
    pub fn new() -> Self {
        Self::default()
    }

    /// Configures the delay, in periods, for the directed link `from -> to`.
    pub fn set_delay(&mut self, from: AgentId, to: AgentId, periods: u64) {
        self.delays.insert((from, to), periods);
    }

    /// Enqueues a message on its link; the delivery period becomes
    /// `sent_period + link delay`. Returns the delivery period.
    pub fn send(&mut self, mut msg: Message) -> Result<u64, TransportError> {
        let delay = *self
            .delays
            .get(&(msg.sender, msg.receiver))
            .ok_or(TransportError::UnknownLink { from: msg.sender, to: msg.receiver })?;
        msg.deliver_period = msg.sent_period + delay;
        let deliver = msg.deliver_period;
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.entry(deliver).or_default().push((seq, msg));
        Ok(deliver)
    }

    /// Enqueues a message exactly as given, bypassing the link table. Used to
    /// prime in-flight shipments at simulation start.
    pub fn schedule(&mut self, msg: Message) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.entry(msg.deliver_period).or_default().push((seq, msg));
    }

    /// Removes and returns every message due at or before `period`, sorted by
    /// sender id then send sequence. Draining guarantees each message is
    /// delivered exactly once, including messages enqueued with zero delay
    /// mid-period (they come out on the next call).
    pub fn deliver(&mut self, period: u64) -> Vec<Message> {
        let mut due: Vec<(u64, Message)> = Vec::new();
        let later = self.queue.split_off(&(period + 1));
        for (_, batch) in std::mem::replace(&mut self.queue, later) {
            due.extend(batch);
        }
        due.sort_by(|(seq_a, a), (seq_b, b)| (a.sender, seq_a).cmp(&(b.sender, seq_b)));
        due.into_iter().map(|(_, m)| m).collect()
    }

    /// Number of messages still in flight.
    pub fn in_flight(&self) -> usize {
        self.queue.values().map(Vec::len).sum()
    }
}

/// One JSONL trace line; field set is fixed.
#[derive(Debug, Serialize)]
struct TraceRecord<'a> {
    period: u64,
    performative: &'a Performative,
    sender: u32,
    receiver: u32,
    payload_type: &'static str,
    qty: Option<f64>,
    price: Option<f64>,
}

/// Serializes one message to its trace line (no trailing newline).
pub fn trace_line(msg: &Message) -> String {
    let record = TraceRecord {
        period: msg.sent_period,
        performative: &msg.performative,
        sender: msg.sender.0,
        receiver: msg.receiver.0,
        payload_type: msg.payload.type_name(),
        qty: msg.payload.qty(),
        price: msg.payload.price(),
    };
    serde_json::to_string(&record).expect("trace record serializes")
}

/// Writes messages as JSON Lines, one object per message.
pub fn write_trace<W: Write>(messages: &[Message], out: &mut W) -> io::Result<()> {
    for msg in messages {
        writeln!(out, "{}", trace_line(msg))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn order(sender: u32, receiver: u32, sent: u64, qty: f64) -> Message {
        Message::new(
            Performative::Request,
            AgentId(sender),
            AgentId(receiver),
            sent,
            Payload::Order { qty },
        )
    }

    fn shipment(sender: u32, receiver: u32, sent: u64, qty: f64) -> Message {
        Message::new(
            Performative::Inform,
            AgentId(sender),
            AgentId(receiver),
            sent,
            Payload::Shipment { qty, order_ref: 0 },
        )
    }

    #[test]
    fn zero_delay_link_delivers_same_period() {
        let mut tr = Transport::new();
        tr.set_delay(AgentId(4), AgentId(3), 0);
        let deliver = tr.send(order(4, 3, 10, 50.0)).unwrap();
        assert_eq!(deliver, 10);
        let delivered = tr.deliver(10);
        assert_eq!(delivered.len(), 1);
        assert_eq!(delivered[0].deliver_period, 10);
    }

    #[test]
    fn shipment_link_applies_lead_time() {
        let mut tr = Transport::new();
        tr.set_delay(AgentId(3), AgentId(4), 1);
        assert_eq!(tr.send(shipment(3, 4, 10, 80.0)).unwrap(), 11);

        let mut tr0 = Transport::new();
        tr0.set_delay(AgentId(3), AgentId(4), 0);
        assert_eq!(tr0.send(shipment(3, 4, 10, 80.0)).unwrap(), 10);
    }

    #[test]
    fn unknown_link_is_an_error() {
        let mut tr = Transport::new();
        assert_eq!(
            tr.send(order(1, 2, 0, 1.0)),
            Err(TransportError::UnknownLink { from: AgentId(1), to: AgentId(2) })
        );
    }

    #[test]
    fn deliver_on_empty_queue_returns_nothing() {
        let mut tr = Transport::new();
        assert!(tr.deliver(7).is_empty());
    }

    #[test]
    fn same_period_messages_ordered_by_sender_id() {
        let mut tr = Transport::new();
        tr.set_delay(AgentId(2), AgentId(1), 0);
        tr.set_delay(AgentId(1), AgentId(0), 0);
        tr.send(order(2, 1, 5, 10.0)).unwrap();
        tr.send(order(1, 0, 5, 20.0)).unwrap();
        let delivered = tr.deliver(5);
        assert_eq!(delivered.len(), 2);
        assert_eq!(delivered[0].sender, AgentId(1));
        assert_eq!(delivered[1].sender, AgentId(2));
    }

    #[test]
    fn future_messages_stay_queued() {
        let mut tr = Transport::new();
        tr.set_delay(AgentId(3), AgentId(4), 1);
        tr.send(shipment(3, 4, 5, 9.0)).unwrap();
        assert!(tr.deliver(5).is_empty());
        assert_eq!(tr.in_flight(), 1);
        assert_eq!(tr.deliver(6).len(), 1);
        assert_eq!(tr.in_flight(), 0);
    }

    #[test]
    fn every_message_delivered_exactly_once() {
        let mut tr = Transport::new();
        for s in 1..=4u32 {
            for r in 0..=5u32 {
                tr.set_delay(AgentId(s), AgentId(r), u64::from((s + r) % 3));
            }
        }
        let mut sent_qty = 0.0;
        let mut n_sent = 0;
        for t in 0..20u64 {
            for s in 1..=4u32 {
                let qty = (t * u64::from(s)) as f64;
                tr.send(order(s, (s + t as u32) % 6, t, qty)).unwrap();
                sent_qty += qty;
                n_sent += 1;
            }
        }
        let mut received_qty = 0.0;
        let mut n_received = 0;
        for t in 0..30u64 {
            for m in tr.deliver(t) {
                received_qty += m.payload.qty().unwrap();
                n_received += 1;
            }
        }
        assert_eq!(n_sent, n_received);
        assert!((sent_qty - received_qty).abs() < 1e-9);
        assert_eq!(tr.in_flight(), 0);
    }

    #[test]
    fn identical_send_sequences_deliver_identically() {
        let run = || {
            let mut tr = Transport::new();
            tr.set_delay(AgentId(4), AgentId(3), 0);
            tr.set_delay(AgentId(3), AgentId(4), 1);
            tr.set_delay(AgentId(2), AgentId(3), 2);
            tr.send(order(4, 3, 0, 1.0)).unwrap();
            tr.send(shipment(3, 4, 0, 2.0)).unwrap();
            tr.send(order(2, 3, 0, 3.0)).unwrap();
            tr.send(shipment(3, 4, 1, 4.0)).unwrap();
            (0..5).flat_map(|t| tr.deliver(t)).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn no_reordering_within_a_sender_receiver_pair() {
        let mut tr = Transport::new();
        tr.set_delay(AgentId(1), AgentId(2), 0);
        for i in 0..10 {
            tr.send(order(1, 2, 3, i as f64)).unwrap();
        }
        let delivered = tr.deliver(3);
        let qtys: Vec<f64> = delivered.iter().map(|m| m.payload.qty().unwrap()).collect();
        assert_eq!(qtys, (0..10).map(|i| i as f64).collect::<Vec<_>>());
    }

    #[test]
    fn trace_line_schema() {
        let msg = shipment(3, 4, 12, 77.5);
        let line = trace_line(&msg);
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["period"], 12);
        assert_eq!(v["performative"], "INFORM");
        assert_eq!(v["sender"], 3);
        assert_eq!(v["receiver"], 4);
        assert_eq!(v["payload_type"], "shipment");
        assert_eq!(v["qty"], 77.5);
        assert!(v["price"].is_null());

        let bid = Message::new(
            Performative::Propose,
            AgentId(4),
            AgentId(3),
            2,
            Payload::Bid { qty: 80.0, price: 114.0, round: 1 },
        );
        let v: serde_json::Value = serde_json::from_str(&trace_line(&bid)).unwrap();
        assert_eq!(v["performative"], "PROPOSE");
        assert_eq!(v["payload_type"], "bid");
        assert_eq!(v["price"], 114.0);
    }
}
