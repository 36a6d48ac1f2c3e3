use std::collections::BTreeMap;

use chrono::{NaiveDate, Timelike};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::ontology::OntologySnapshot;

use super::calendar::FactoryCalendar;
use super::events::{CdcOp, CdcRecord, EventLog};
use super::profile::DisruptionProfile;
use super::rng::{poisson, stream, triangular_unit, uniform_f64, uniform_u32, weighted_index};
use super::seed::{generate_seed_entities, SeedDataset};

/// Outcome of the four scheduling gates for one pending operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GateResult {
    pub equipment_available: bool,
    pub no_supply_delay: bool,
    pub upstream_complete: bool,
    pub operator_available: bool,
}

impl GateResult {
    pub fn all_pass(&self) -> bool {
        self.equipment_available && self.no_supply_delay && self.upstream_complete && self.operator_available
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OpStatus {
    Pending,
    Running,
    AwaitingInspection,
    Passed,
    Failed,
}

struct Slot {
    current_op: usize,
    satisfied: bool,
}

struct Order {
    order_id: String,
    due_tick: u64,
    expedited: bool,
    started: bool,
    closed: bool,
    slots: Vec<Slot>,
}

struct Op {
    op_id: String,
    order_idx: usize,
    slot_idx: usize,
    station: String,
    status: OpStatus,
    end_tick: u64,
    remaining: u32,
    operator_idx: Option<usize>,
    equipment_idx: Option<usize>,
    supply_checked: bool,
    supply_blocked_until: Option<u64>,
}

struct EquipState {
    equipment_id: String,
    station_id: String,
    down_until: Option<u64>,
    busy_op: Option<usize>,
    open_downtime: Option<(String, u32)>,
}

struct OperState {
    operator_id: String,
    shift_window: (u32, u32),
    certifications: std::collections::BTreeSet<String>,
    busy_op: Option<usize>,
}

struct PendingNcr {
    ncr_id: String,
    op_idx: usize,
    disposition: String,
    transitions: Vec<(u64, &'static str)>,
    next: usize,
}

struct PendingApproval {
    package_id: String,
    approve_tick: u64,
}

const NCR_LIFECYCLE: [&str; 4] = ["Open", "UnderReview", "Dispositioned", "Closed"];

struct Engine {
    snap: OntologySnapshot,
    calendar: FactoryCalendar,
    profile: DisruptionProfile,
    log: Vec<CdcRecord>,

    orders_rng: ChaCha8Rng,
    durations_rng: ChaCha8Rng,
    downtime_rng: ChaCha8Rng,
    inspection_rng: ChaCha8Rng,
    spc_rng: ChaCha8Rng,
    disruption_rng: ChaCha8Rng,
    planning_rng: ChaCha8Rng,

    orders: Vec<Order>,
    ops: Vec<Op>,
    pending: Vec<usize>,
    running: Vec<usize>,
    awaiting: Vec<usize>,
    equipment: Vec<EquipState>,
    station_equipment: BTreeMap<String, Vec<usize>>,
    operators: Vec<OperState>,
    ncr_queue: Vec<PendingNcr>,
    approval_queue: Vec<PendingApproval>,
    lots_by_material: BTreeMap<String, Vec<String>>,
    lot_rotation: BTreeMap<String, usize>,

    order_seq: u64,
    op_seq: u64,
    ncr_seq: u64,
    consumption_seq: u64,
    sample_seq: u64,
    downtime_seq: u64,
    delay_seq: u64,
    package_seq: u64,
    revision_seq: u64,

    last_production_day: Option<NaiveDate>,
    next_revision_day: u32,
    stations_in_rotation: Vec<String>,
}

impl Engine {
    fn new(snap: &OntologySnapshot, seed: u64, profile: &DisruptionProfile, dataset: &SeedDataset) -> Self {
        let doc = snap.document();
        let calendar = FactoryCalendar::from_document(doc);
        let shift_windows: BTreeMap<&String, (u32, u32)> = doc
            .shifts
            .iter()
            .map(|s| (&s.shift_id, (s.start_min, s.end_min)))
            .collect();

        let mut station_equipment: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let equipment: Vec<EquipState> = dataset
            .equipment
            .iter()
            .enumerate()
            .map(|(i, e)| {
                station_equipment.entry(e.station_id.clone()).or_default().push(i);
                EquipState {
                    equipment_id: e.equipment_id.clone(),
                    station_id: e.station_id.clone(),
                    down_until: None,
                    busy_op: None,
                    open_downtime: None,
                }
            })
            .collect();

        let operators: Vec<OperState> = dataset
            .operators
            .iter()
            .map(|o| OperState {
                operator_id: o.operator_id.clone(),
                shift_window: shift_windows[&o.shift_id],
                certifications: o.certifications.clone(),
                busy_op: None,
            })
            .collect();

        Engine {
            snap: snap.clone(),
            calendar,
            profile: profile.clone(),
            log: dataset.records.clone(),
            orders_rng: stream(seed, "orders"),
            durations_rng: stream(seed, "durations"),
            downtime_rng: stream(seed, "downtime"),
            inspection_rng: stream(seed, "inspection"),
            spc_rng: stream(seed, "spc"),
            disruption_rng: stream(seed, "disruption"),
            planning_rng: stream(seed, "planning"),
            orders: Vec::new(),
            ops: Vec::new(),
            pending: Vec::new(),
            running: Vec::new(),
            awaiting: Vec::new(),
            equipment,
            station_equipment,
            operators,
            ncr_queue: Vec::new(),
            approval_queue: Vec::new(),
            lots_by_material: dataset
                .lots_by_material
                .iter()
                .map(|(m, lots)| (m.clone(), lots.iter().map(|l| l.lot_id.clone()).collect()))
                .collect(),
            lot_rotation: BTreeMap::new(),
            order_seq: 0,
            op_seq: 0,
            ncr_seq: 0,
            consumption_seq: 0,
            sample_seq: 0,
            downtime_seq: 0,
            delay_seq: 0,
            package_seq: 0,
            revision_seq: 0,
            last_production_day: None,
            next_revision_day: doc.bop_revision_interval_days,
            stations_in_rotation: snap.station_order().to_vec(),
        }
    }

    fn ts(&self, tick: u64) -> String {
        self.calendar.timestamp_of_tick(tick)
    }

    fn emit(&mut self, table: &str, op: CdcOp, tick: u64, payload: serde_json::Value) {
        self.log.push(CdcRecord::new(table, op, self.ts(tick), payload));
    }

    // ------------------------------------------------------------------
    // Tick sequence
    // ------------------------------------------------------------------

    fn tick(&mut self, tick: u64) {
        if tick.is_multiple_of(1440) {
            self.emit_calendar_day(tick);
        }
        let productive = self.calendar.is_productive_tick(tick);
        let date = self.calendar.datetime_of_tick(tick).date();
        let first_productive_of_day = productive && self.last_production_day != Some(date);
        if first_productive_of_day {
            self.last_production_day = Some(date);
        }

        // 1. Disruption handling.
        if productive {
            self.draw_supply_delays(tick);
        }
        // 2. Daily order creation.
        if first_productive_of_day {
            self.create_daily_orders(tick);
        }
        // 3. Operation advancement.
        if productive {
            self.advance_running(tick);
            self.start_eligible(tick);
        }
        // 4. Equipment status.
        self.update_equipment(tick, productive);
        // 5. Quality inspection and NCR lifecycle.
        if productive {
            self.run_inspections(tick);
        }
        self.advance_ncrs(tick);
        // 6. Planning revisions.
        if first_productive_of_day {
            self.planning_revisions(tick);
        }
        self.process_approvals(tick);
    }

    fn emit_calendar_day(&mut self, tick: u64) {
        let date = self.calendar.datetime_of_tick(tick).date();
        let payload = json!({
            "date": date.format("%Y-%m-%d").to_string(),
            "day_of_week": date.format("%a").to_string(),
            "is_operating": self.calendar.is_operating_day(date),
            "iso_week": format!("{}-W{:02}",
                chrono::Datelike::iso_week(&date).year(),
                chrono::Datelike::iso_week(&date).week()),
        });
        self.emit("calendar_day", CdcOp::Insert, tick, payload);
    }

    fn draw_supply_delays(&mut self, tick: u64) {
        if self.profile.supply_delay_prob <= 0.0 {
            for &idx in &self.pending {
                self.ops[idx].supply_checked = true;
            }
            return;
        }
        let unchecked: Vec<usize> = self
            .pending
            .iter()
            .copied()
            .filter(|&i| !self.ops[i].supply_checked)
            .collect();
        for idx in unchecked {
            self.ops[idx].supply_checked = true;
            if self.disruption_rng.random::<f64>() < self.profile.supply_delay_prob {
                let (lo, hi) = self.profile.supply_delay_duration_min;
                let until = tick + u64::from(uniform_u32(&mut self.disruption_rng, lo, hi));
                self.ops[idx].supply_blocked_until = Some(until);
                self.delay_seq += 1;
                let payload = json!({
                    "delay_id": format!("SD-{:05}", self.delay_seq),
                    "operation_id": self.ops[idx].op_id,
                    "station_id": self.ops[idx].station,
                    "start_at": self.ts(tick),
                    "until_at": self.ts(until),
                });
                self.emit("supply_delay", CdcOp::Insert, tick, payload);
            }
        }
    }

    fn create_daily_orders(&mut self, tick: u64) {
        let doc = self.snap.document().clone();
        for (product_id, product) in &doc.products {
            let n = poisson(&mut self.orders_rng, product.daily_volume);
            for _ in 0..n {
                self.order_seq += 1;
                let order_id = format!("WO-{:05}", self.order_seq);
                let quantity = uniform_u32(&mut self.orders_rng, 1, 5);
                let expedite_p = (doc.order_expedite_rate * self.profile.expedite_multiplier).min(1.0);
                let expedited = self.orders_rng.random::<f64>() < expedite_p;
                let due_days = uniform_u32(&mut self.orders_rng, 3, 10);
                let due_tick = tick + u64::from(due_days) * 1440;
                let plan = &doc.process_plans[product_id];

                let order_idx = self.orders.len();
                let payload = json!({
                    "order_id": order_id,
                    "product_id": product_id,
                    "quantity": quantity,
                    "created_at": self.ts(tick),
                    "due_at": self.ts(due_tick),
                    "status": if expedited { "Expedited" } else { "Created" },
                    "expedited": expedited,
                    "outcome": serde_json::Value::Null,
                });
                self.emit("work_order", CdcOp::Insert, tick, payload);

                let mut slots = Vec::new();
                for (slot_idx, station) in plan.iter().enumerate() {
                    let op_idx = self.new_operation(tick, order_idx, slot_idx, station, None);
                    slots.push(Slot { current_op: op_idx, satisfied: false });
                }
                self.orders.push(Order {
                    order_id,
                    due_tick,
                    expedited,
                    started: false,
                    closed: false,
                    slots,
                });
            }
        }
    }

    fn new_operation(
        &mut self,
        tick: u64,
        order_idx: usize,
        slot_idx: usize,
        station: &str,
        rework_of: Option<String>,
    ) -> usize {
        self.op_seq += 1;
        let op_id = format!("OP-{:06}", self.op_seq);
        let order_id = if order_idx < self.orders.len() {
            self.orders[order_idx].order_id.clone()
        } else {
            format!("WO-{:05}", self.order_seq)
        };
        let payload = json!({
            "operation_id": op_id,
            "order_id": order_id,
            "station_id": station,
            "seq": slot_idx + 1,
            "status": "Pending",
            "created_at": self.ts(tick),
            "start_at": serde_json::Value::Null,
            "end_at": serde_json::Value::Null,
            "inspected_at": serde_json::Value::Null,
            "setup_min": serde_json::Value::Null,
            "cycle_min": serde_json::Value::Null,
            "operator_id": serde_json::Value::Null,
            "equipment_id": serde_json::Value::Null,
            "rework_of": rework_of,
        });
        self.emit("operation", CdcOp::Insert, tick, payload);
        self.emit_history(tick, &op_id, "Pending");

        let idx = self.ops.len();
        self.ops.push(Op {
            op_id,
            order_idx,
            slot_idx,
            station: station.to_string(),
            status: OpStatus::Pending,
            end_tick: 0,
            remaining: 0,
            operator_idx: None,
            equipment_idx: None,
            supply_checked: false,
            supply_blocked_until: None,
        });
        self.pending.push(idx);
        idx
    }

    fn emit_history(&mut self, tick: u64, op_id: &str, status: &str) {
        let payload = json!({"operation_id": op_id, "status": status, "at": self.ts(tick)});
        self.emit("operation_status_history", CdcOp::Insert, tick, payload);
    }

    fn advance_running(&mut self, tick: u64) {
        let running = std::mem::take(&mut self.running);
        for idx in running {
            let equipment_up = self.ops[idx]
                .equipment_idx
                .map(|e| self.equipment[e].down_until.is_none())
                .unwrap_or(true);
            if !equipment_up {
                self.running.push(idx);
                continue;
            }
            self.ops[idx].remaining -= 1;
            if self.ops[idx].remaining > 0 {
                self.running.push(idx);
                continue;
            }
            // Completed: release resources and queue for inspection.
            self.ops[idx].status = OpStatus::AwaitingInspection;
            self.ops[idx].end_tick = tick;
            if let Some(e) = self.ops[idx].equipment_idx {
                self.equipment[e].busy_op = None;
            }
            if let Some(o) = self.ops[idx].operator_idx {
                self.operators[o].busy_op = None;
            }
            let op_id = self.ops[idx].op_id.clone();
            let payload = json!({
                "operation_id": op_id,
                "status": "AwaitingInspection",
                "end_at": self.ts(tick),
            });
            self.emit("operation", CdcOp::Update, tick, payload);
            self.emit_history(tick, &op_id, "AwaitingInspection");
            self.awaiting.push(idx);
        }
    }

    fn gate(&self, idx: usize, tick: u64) -> GateResult {
        let op = &self.ops[idx];
        let doc = self.snap.document();

        let equipment_available = self.station_equipment
            .get(&op.station)
            .map(|units| {
                units.iter().any(|&e| {
                    self.equipment[e].down_until.is_none() && self.equipment[e].busy_op.is_none()
                })
            })
            .unwrap_or(false);

        let no_supply_delay = match op.supply_blocked_until {
            Some(until) => tick >= until,
            None => true,
        };

        let upstream_complete = if op.slot_idx == 0 {
            true
        } else {
            self.orders[op.order_idx].slots[op.slot_idx - 1].satisfied
        };

        let minute = {
            let dt = self.calendar.datetime_of_tick(tick);
            dt.hour() * 60 + dt.minute()
        };
        let required = doc.station_certifications.get(&op.station);
        let operator_available = self.operators.iter().any(|o| {
            o.busy_op.is_none()
                && minute >= o.shift_window.0
                && minute < o.shift_window.1
                && required.is_none_or(|req| req.iter().all(|c| o.certifications.contains(c)))
        });

        GateResult { equipment_available, no_supply_delay, upstream_complete, operator_available }
    }

    fn start_eligible(&mut self, tick: u64) {
        let doc = self.snap.document().clone();
        let mut queue: Vec<usize> = self
            .pending
            .iter()
            .copied()
            .filter(|&i| !self.orders[self.ops[i].order_idx].closed)
            .collect();
        // Expedited orders jump the queue; then earliest due date, stable ids.
        queue.sort_by_key(|&i| {
            let op = &self.ops[i];
            let order = &self.orders[op.order_idx];
            (!order.expedited, order.due_tick, op.order_idx, op.slot_idx)
        });

        let mut started = Vec::new();
        for idx in queue {
            if !self.gate(idx, tick).all_pass() {
                continue;
            }
            let station = self.ops[idx].station.clone();
            let equip_idx = self.station_equipment[&station]
                .iter()
                .copied()
                .find(|&e| self.equipment[e].down_until.is_none() && self.equipment[e].busy_op.is_none())
                .expect("gate checked equipment");
            let minute = {
                let dt = self.calendar.datetime_of_tick(tick);
                dt.hour() * 60 + dt.minute()
            };
            let required = doc.station_certifications.get(&station);
            let oper_idx = self
                .operators
                .iter()
                .position(|o| {
                    o.busy_op.is_none()
                        && minute >= o.shift_window.0
                        && minute < o.shift_window.1
                        && required.is_none_or(|req| req.iter().all(|c| o.certifications.contains(c)))
                })
                .expect("gate checked operator");

            let s = &doc.stations[&station];
            let setup = uniform_f64(&mut self.durations_rng, s.setup_time_min.0, s.setup_time_min.1);
            let base = uniform_f64(&mut self.durations_rng, s.cycle_time_range_min.0, s.cycle_time_range_min.1);
            let spread = triangular_unit(&mut self.durations_rng);
            let cycle = base * (1.0 + doc.cycle_time_variance * spread);
            let setup_min = setup.round().max(1.0);
            let cycle_min = cycle.round().max(1.0);

            self.equipment[equip_idx].busy_op = Some(idx);
            self.operators[oper_idx].busy_op = Some(idx);
            {
                let op = &mut self.ops[idx];
                op.status = OpStatus::Running;
                op.remaining = (setup_min + cycle_min) as u32;
                op.operator_idx = Some(oper_idx);
                op.equipment_idx = Some(equip_idx);
            }
            let op_id = self.ops[idx].op_id.clone();
            self.emit_history(tick, &op_id, "Ready");
            self.emit_history(tick, &op_id, "Running");
            let payload = json!({
                "operation_id": op_id,
                "status": "Running",
                "start_at": self.ts(tick),
                "setup_min": setup_min,
                "cycle_min": cycle_min,
                "operator_id": self.operators[oper_idx].operator_id,
                "equipment_id": self.equipment[equip_idx].equipment_id,
            });
            self.emit("operation", CdcOp::Update, tick, payload);
            self.consume_materials(tick, idx);

            let order_idx = self.ops[idx].order_idx;
            if !self.orders[order_idx].started {
                self.orders[order_idx].started = true;
                let payload = json!({
                    "order_id": self.orders[order_idx].order_id,
                    "status": "InProgress",
                });
                self.emit("work_order", CdcOp::Update, tick, payload);
            }
            started.push(idx);
            self.running.push(idx);
        }
        self.pending.retain(|i| !started.contains(i));
    }

    fn consume_materials(&mut self, tick: u64, idx: usize) {
        let doc = self.snap.document();
        let station = self.ops[idx].station.clone();
        let draws = match doc.operation_material_consumption.get(&station) {
            Some(d) => d.clone(),
            None => return,
        };
        let op_id = self.ops[idx].op_id.clone();
        let order_id = self.orders[self.ops[idx].order_idx].order_id.clone();
        for draw in draws {
            let lot = {
                let rotation = self.lot_rotation.entry(draw.material.clone()).or_insert(0);
                let lot_ids = &self.lots_by_material[&draw.material];
                let lot = lot_ids[*rotation % lot_ids.len()].clone();
                *rotation += 1;
                lot
            };
            self.consumption_seq += 1;
            let payload = json!({
                "consumption_id": format!("MC-{:06}", self.consumption_seq),
                "operation_id": op_id,
                "order_id": order_id,
                "station_id": station,
                "material_id": draw.material,
                "lot_id": lot,
                "qty": draw.qty_per_op,
                "at": self.ts(tick),
            });
            self.emit("material_consumption", CdcOp::Insert, tick, payload);
        }
    }

    fn update_equipment(&mut self, tick: u64, productive: bool) {
        let p = (self.snap.document().equipment_downtime_prob * self.profile.downtime_multiplier).min(1.0);
        let (dur_lo, dur_hi) = self.snap.document().equipment_downtime_duration_min;
        for e in 0..self.equipment.len() {
            if let Some(until) = self.equipment[e].down_until {
                if tick >= until {
                    self.equipment[e].down_until = None;
                    let (downtime_id, duration) =
                        self.equipment[e].open_downtime.take().expect("open downtime record");
                    let payload = json!({
                        "downtime_id": downtime_id,
                        "end_at": self.ts(tick),
                        "duration_min": duration,
                    });
                    self.emit("equipment_downtime", CdcOp::Update, tick, payload);
                    let payload = json!({
                        "equipment_id": self.equipment[e].equipment_id,
                        "status": "Up",
                    });
                    self.emit("equipment", CdcOp::Update, tick, payload);
                }
            } else if productive && self.downtime_rng.random::<f64>() < p {
                let duration = uniform_u32(&mut self.downtime_rng, dur_lo, dur_hi);
                let reason_pool = ["unplanned_breakdown", "sensor_fault", "feed_jam", "calibration_drift"];
                let reason = reason_pool[uniform_u32(&mut self.downtime_rng, 0, 3) as usize];
                self.downtime_seq += 1;
                let downtime_id = format!("DT-{:05}", self.downtime_seq);
                self.equipment[e].down_until = Some(tick + u64::from(duration));
                self.equipment[e].open_downtime = Some((downtime_id.clone(), duration));
                let payload = json!({
                    "downtime_id": downtime_id,
                    "equipment_id": self.equipment[e].equipment_id,
                    "station_id": self.equipment[e].station_id,
                    "start_at": self.ts(tick),
                    "end_at": serde_json::Value::Null,
                    "duration_min": serde_json::Value::Null,
                    "reason": reason,
                });
                self.emit("equipment_downtime", CdcOp::Insert, tick, payload);
                let payload = json!({
                    "equipment_id": self.equipment[e].equipment_id,
                    "status": "Down",
                });
                self.emit("equipment", CdcOp::Update, tick, payload);
            }
        }
    }

    fn run_inspections(&mut self, tick: u64) {
        let due: Vec<usize> = self
            .awaiting
            .iter()
            .copied()
            .filter(|&i| self.ops[i].end_tick < tick)
            .collect();
        if due.is_empty() {
            return;
        }
        self.awaiting.retain(|i| !due.contains(i));
        let doc = self.snap.document().clone();
        for idx in due {
            let station_id = self.ops[idx].station.clone();
            let station = &doc.stations[&station_id];
            let op_id = self.ops[idx].op_id.clone();

            self.emit_spc_samples(tick, &op_id, &station_id);

            let passed = self.inspection_rng.random::<f64>() < station.first_pass_yield;
            if passed {
                self.ops[idx].status = OpStatus::Passed;
                let payload = json!({
                    "operation_id": op_id,
                    "status": "Passed",
                    "inspected_at": self.ts(tick),
                });
                self.emit("operation", CdcOp::Update, tick, payload);
                self.emit_history(tick, &op_id, "Passed");
                let payload = json!({
                    "operation_id": op_id,
                    "station_id": station_id,
                    "result": "pass",
                    "at": self.ts(tick),
                    "failure_code": serde_json::Value::Null,
                });
                self.emit("inspection_result", CdcOp::Insert, tick, payload);
                let (order_idx, slot_idx) = (self.ops[idx].order_idx, self.ops[idx].slot_idx);
                self.orders[order_idx].slots[slot_idx].satisfied = true;
                self.check_order_complete(tick, order_idx);
            } else {
                self.ops[idx].status = OpStatus::Failed;
                let codes = &doc.station_failure_codes[&station_id];
                let code = codes[uniform_u32(&mut self.inspection_rng, 0, codes.len() as u32 - 1) as usize].clone();
                let severity = doc.failure_codes[&code].severity.clone();
                let capa = self.inspection_rng.random::<f64>() < doc.capa_trigger_rate;

                // Quality gates never accept nonconforming work as-is.
                let dispositions: Vec<(&String, f64)> = doc
                    .ncr_dispositions
                    .iter()
                    .map(|(id, d)| {
                        let w = if station.is_quality_gate && id == "use_as_is" { 0.0 } else { d.weight };
                        (id, w)
                    })
                    .collect();
                let weights: Vec<f64> = dispositions.iter().map(|(_, w)| *w).collect();
                let disposition = dispositions[weighted_index(&mut self.inspection_rng, &weights)].0.clone();

                let payload = json!({
                    "operation_id": op_id,
                    "status": "Failed",
                    "inspected_at": self.ts(tick),
                });
                self.emit("operation", CdcOp::Update, tick, payload);
                self.emit_history(tick, &op_id, "Failed");
                let payload = json!({
                    "operation_id": op_id,
                    "station_id": station_id,
                    "result": "fail",
                    "at": self.ts(tick),
                    "failure_code": code,
                });
                self.emit("inspection_result", CdcOp::Insert, tick, payload);

                self.ncr_seq += 1;
                let ncr_id = format!("NCR-{:05}", self.ncr_seq);
                let order_id = self.orders[self.ops[idx].order_idx].order_id.clone();
                let payload = json!({
                    "ncr_id": ncr_id,
                    "operation_id": op_id,
                    "order_id": order_id,
                    "station_id": station_id,
                    "failure_code": code,
                    "severity": severity,
                    "disposition": serde_json::Value::Null,
                    "capa_flag": capa,
                    "status": "Open",
                    "created_at": self.ts(tick),
                });
                self.emit("ncr", CdcOp::Insert, tick, payload);
                let payload = json!({"ncr_id": ncr_id, "status": "Open", "at": self.ts(tick)});
                self.emit("ncr_status_history", CdcOp::Insert, tick, payload);

                let mut transitions = Vec::new();
                let mut at = tick;
                for status in &NCR_LIFECYCLE[1..] {
                    let (lo, hi) = doc
                        .ncr_status_durations
                        .get(NCR_LIFECYCLE[transitions.len()])
                        .copied()
                        .unwrap_or((60, 480));
                    at += u64::from(uniform_u32(&mut self.inspection_rng, lo, hi));
                    transitions.push((at, *status));
                }
                self.ncr_queue.push(PendingNcr { ncr_id, op_idx: idx, disposition, transitions, next: 0 });
            }
        }
    }

    fn emit_spc_samples(&mut self, tick: u64, op_id: &str, station_id: &str) {
        let doc = self.snap.document().clone();
        let plan_id = match doc.station_inspection_plans.get(station_id) {
            Some(p) => p.clone(),
            None => return,
        };
        let plan = &doc.inspection_plans[&plan_id];
        for c in &plan.characteristics {
            let center = (c.lsl + c.usl) / 2.0;
            let half = (c.usl - c.lsl) / 2.0;
            let value = center + triangular_unit(&mut self.spc_rng) * 1.15 * half;
            let in_control = value >= c.lsl && value <= c.usl;
            self.sample_seq += 1;
            let payload = json!({
                "sample_id": format!("SPC-{:06}", self.sample_seq),
                "operation_id": op_id,
                "station_id": station_id,
                "characteristic": c.name,
                "value": (value * 10000.0).round() / 10000.0,
                "lsl": c.lsl,
                "usl": c.usl,
                "in_control": in_control,
                "at": self.ts(tick),
            });
            self.emit("spc_sample", CdcOp::Insert, tick, payload);
        }
    }

    fn check_order_complete(&mut self, tick: u64, order_idx: usize) {
        if self.orders[order_idx].closed {
            return;
        }
        if self.orders[order_idx].slots.iter().all(|s| s.satisfied) {
            self.orders[order_idx].closed = true;
            let payload = json!({
                "order_id": self.orders[order_idx].order_id,
                "status": "Complete",
                "outcome": "completed",
            });
            self.emit("work_order", CdcOp::Update, tick, payload);
        }
    }

    fn advance_ncrs(&mut self, tick: u64) {
        let mut actions: Vec<(String, usize, String, &'static str)> = Vec::new();
        for pending in &mut self.ncr_queue {
            while pending.next < pending.transitions.len() && pending.transitions[pending.next].0 <= tick {
                let (_, status) = pending.transitions[pending.next];
                pending.next += 1;
                actions.push((pending.ncr_id.clone(), pending.op_idx, pending.disposition.clone(), status));
            }
        }
        self.ncr_queue.retain(|p| p.next < p.transitions.len());

        for (ncr_id, op_idx, disposition, status) in actions {
            let mut update = json!({"ncr_id": ncr_id, "status": status});
            if status == "Dispositioned" {
                update["disposition"] = json!(disposition);
            }
            self.emit("ncr", CdcOp::Update, tick, update);
            let payload = json!({"ncr_id": ncr_id, "status": status, "at": self.ts(tick)});
            self.emit("ncr_status_history", CdcOp::Insert, tick, payload);

            if status == "Dispositioned" {
                self.apply_disposition(tick, op_idx, &disposition);
            }
        }
    }

    fn apply_disposition(&mut self, tick: u64, op_idx: usize, disposition: &str) {
        let order_idx = self.ops[op_idx].order_idx;
        let slot_idx = self.ops[op_idx].slot_idx;
        if self.orders[order_idx].closed {
            return;
        }
        match disposition {
            "rework" => {
                let station = self.ops[op_idx].station.clone();
                let rework_of = Some(self.ops[op_idx].op_id.clone());
                let new_idx = self.new_operation(tick, order_idx, slot_idx, &station, rework_of);
                self.orders[order_idx].slots[slot_idx].current_op = new_idx;
            }
            "scrap" => {
                self.orders[order_idx].closed = true;
                let payload = json!({
                    "order_id": self.orders[order_idx].order_id,
                    "status": "Complete",
                    "outcome": "scrapped",
                });
                self.emit("work_order", CdcOp::Update, tick, payload);
                let open_ops: Vec<usize> = self
                    .pending
                    .iter()
                    .copied()
                    .filter(|&i| self.ops[i].order_idx == order_idx)
                    .collect();
                self.pending.retain(|i| !open_ops.contains(i));
            }
            _ => {
                // use_as_is and any custom disposition: accept and move on.
                self.orders[order_idx].slots[slot_idx].satisfied = true;
                self.check_order_complete(tick, order_idx);
            }
        }
    }

    fn planning_revisions(&mut self, tick: u64) {
        let doc = self.snap.document().clone();
        let day_index = (tick / 1440) as u32;

        if day_index >= self.next_revision_day {
            while self.next_revision_day <= day_index {
                self.next_revision_day += doc.bop_revision_interval_days;
            }
            let step_ids: Vec<&String> = doc.step_templates.keys().collect();
            for (product, plan) in &doc.process_plans {
                self.revision_seq += 1;
                let revision_id = format!("REV-{:04}", self.revision_seq);
                let payload = json!({
                    "revision_id": revision_id,
                    "product_id": product,
                    "plan_id": format!("PP-{product}"),
                    "revision_no": self.revision_seq,
                    "at": self.ts(tick),
                });
                self.emit("bop_revision", CdcOp::Insert, tick, payload);
                for (i, station) in plan.iter().enumerate() {
                    let payload = json!({
                        "revision_id": revision_id,
                        "station_id": station,
                        "step_template_id": step_ids[i % step_ids.len()],
                    });
                    self.emit("bop_revision_step", CdcOp::Insert, tick, payload);
                }
            }
        }

        let packages = poisson(&mut self.planning_rng, doc.change_package_rate);
        for _ in 0..packages {
            self.package_seq += 1;
            let package_id = format!("CP-{:04}", self.package_seq);
            let params = &doc.change_package_params;
            let affected = uniform_u32(
                &mut self.planning_rng,
                params.min_affected_stations.max(1),
                params.max_affected_stations.min(self.stations_in_rotation.len() as u32),
            ) as usize;
            let mut stations = Vec::new();
            let mut cursor =
                uniform_u32(&mut self.planning_rng, 0, self.stations_in_rotation.len() as u32 - 1) as usize;
            while stations.len() < affected {
                let station = &self.stations_in_rotation[cursor % self.stations_in_rotation.len()];
                if !stations.contains(station) {
                    stations.push(station.clone());
                }
                cursor += 1;
            }
            let approval_days = uniform_u32(
                &mut self.planning_rng,
                params.approval_days_range.0,
                params.approval_days_range.1,
            );
            let payload = json!({
                "package_id": package_id,
                "title": format!("Process change affecting {}", stations.join(", ")),
                "status": "Open",
                "created_at": self.ts(tick),
                "approved_at": serde_json::Value::Null,
            });
            self.emit("change_package", CdcOp::Insert, tick, payload);
            for station in &stations {
                let payload = json!({"package_id": package_id, "station_id": station});
                self.emit("change_package_station", CdcOp::Insert, tick, payload);
            }
            self.approval_queue.push(PendingApproval {
                package_id,
                approve_tick: tick + u64::from(approval_days) * 1440,
            });
        }
    }

    fn process_approvals(&mut self, tick: u64) {
        let due: Vec<String> = self
            .approval_queue
            .iter()
            .filter(|p| p.approve_tick <= tick)
            .map(|p| p.package_id.clone())
            .collect();
        if due.is_empty() {
            return;
        }
        self.approval_queue.retain(|p| p.approve_tick > tick);
        for package_id in due {
            let payload = json!({
                "package_id": package_id,
                "status": "Approved",
                "approved_at": self.ts(tick),
            });
            self.emit("change_package", CdcOp::Update, tick, payload);
        }
    }
}

/// Headline counters extracted from a finished run.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RunSummary {
    pub records: usize,
    pub orders_created: u64,
    pub operations_inspected: u64,
    pub ncr_count: u64,
    pub downtime_events: u64,
}

impl RunSummary {
    pub fn from_log(log: &EventLog) -> Self {
        RunSummary {
            records: log.len(),
            orders_created: log.inserts_for("work_order").count() as u64,
            operations_inspected: log.inserts_for("inspection_result").count() as u64,
            ncr_count: log.inserts_for("ncr").count() as u64,
            downtime_events: log.inserts_for("equipment_downtime").count() as u64,
        }
    }
}

/// Run a complete simulation: seed generation plus `days` calendar days of
/// 1-minute ticks. Identical inputs yield a byte-identical event log.
pub fn run_simulation(
    snap: &OntologySnapshot,
    seed: u64,
    days: u32,
    profile: &DisruptionProfile,
) -> EventLog {
    let dataset = generate_seed_entities(snap, seed);
    let mut engine = Engine::new(snap, seed, profile, &dataset);
    let horizon = u64::from(days) * 1440;
    for tick in 0..horizon {
        engine.tick(tick);
    }
    EventLog { records: engine.log }
}

/// Test support: run `ticks` minutes, then report the gate outcome of every
/// pending operation as (operation id, station, gates).
pub fn evaluate_gates_for_test(
    snap: &OntologySnapshot,
    seed: u64,
    profile: &DisruptionProfile,
    ticks: u64,
) -> Vec<(String, String, GateResult)> {
    let dataset = generate_seed_entities(snap, seed);
    let mut engine = Engine::new(snap, seed, profile, &dataset);
    for tick in 0..ticks {
        engine.tick(tick);
    }
    engine
        .pending
        .iter()
        .map(|&i| {
            (
                engine.ops[i].op_id.clone(),
                engine.ops[i].station.clone(),
                engine.gate(i, ticks),
            )
        })
        .collect()
}
