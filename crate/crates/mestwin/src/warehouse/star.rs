use std::collections::BTreeMap;

use serde::Serialize;

use super::store::{count_rows, StorageError, StoragePort};

#[derive(Debug, Clone, Serialize)]
pub struct StarReport {
    pub fact_rows: BTreeMap<String, u64>,
    pub dimension_rows: BTreeMap<String, u64>,
    pub bridge_rows: u64,
}

/// Rebuild every analytics table from the operational layer. The refresh is
/// a full delete-and-reload of derived tables, so running it twice yields the
/// same state as running it once.
pub fn refresh_star(store: &dyn StoragePort) -> Result<StarReport, StorageError> {
    store.execute_batch(REFRESH_SQL)?;

    let mut fact_rows = BTreeMap::new();
    for table in [
        "fact_operation_execution",
        "fact_work_order",
        "fact_ncr",
        "fact_inspection_result",
        "fact_equipment_downtime",
        "fact_material_consumption",
        "fact_change_package",
        "fact_spc_sample",
    ] {
        fact_rows.insert(table.to_string(), count_rows(store, table)?);
    }
    let mut dimension_rows = BTreeMap::new();
    for table in [
        "dim_date",
        "dim_shift",
        "dim_station",
        "dim_work_center",
        "dim_equipment",
        "dim_operator",
        "dim_product",
        "dim_raw_material",
        "dim_finished_material",
        "dim_supplier",
        "dim_failure_code",
        "dim_inspection_plan",
        "dim_certification",
        "dim_tool",
    ] {
        dimension_rows.insert(table.to_string(), count_rows(store, table)?);
    }
    Ok(StarReport {
        fact_rows,
        dimension_rows,
        bridge_rows: count_rows(store, "bridge_operator_certification")?,
    })
}

/// Derived-table reload. Dimensions sourced from the snapshot at build time
/// (station, product, …) are left as built; dimensions sourced from seed data
/// (date, equipment, operator) and all facts are rebuilt from operational
/// tables.
const REFRESH_SQL: &str = "
DELETE FROM dim_date;
INSERT INTO dim_date (date_key, day_of_week, is_operating, iso_week)
SELECT date, day_of_week, is_operating, iso_week FROM calendar_day;

DELETE FROM dim_equipment;
INSERT INTO dim_equipment (equipment_key, name, station_key)
SELECT equipment_id, name, station_id FROM equipment;

DELETE FROM dim_operator;
INSERT INTO dim_operator (operator_key, name, shift_key)
SELECT operator_id, name, shift_id FROM operator;

DELETE FROM bridge_operator_certification;
INSERT INTO bridge_operator_certification (operator_key, cert_key)
SELECT operator_id, cert_id FROM operator_certification;

DELETE FROM fact_operation_execution;
INSERT INTO fact_operation_execution
  (operation_id, order_id, date_key, station_key, product_key, operator_key,
   equipment_key, shift_key, setup_min, cycle_min, total_min, passed, ncr_flag)
SELECT
  o.operation_id,
  o.order_id,
  substr(o.start_at, 1, 10),
  o.station_id,
  w.product_id,
  o.operator_id,
  o.equipment_id,
  op.shift_id,
  o.setup_min,
  o.cycle_min,
  o.setup_min + o.cycle_min,
  CASE o.status WHEN 'Passed' THEN 1 ELSE 0 END,
  CASE o.status WHEN 'Failed' THEN 1 ELSE 0 END
FROM operation o
JOIN work_order w ON w.order_id = o.order_id
LEFT JOIN operator op ON op.operator_id = o.operator_id
WHERE o.status IN ('Passed', 'Failed');

DELETE FROM fact_work_order;
INSERT INTO fact_work_order
  (order_id, product_key, created_date_key, due_date_key, status, expedited, quantity)
SELECT order_id, product_id, substr(created_at, 1, 10), substr(due_at, 1, 10),
       status, expedited, quantity
FROM work_order;

DELETE FROM fact_ncr;
INSERT INTO fact_ncr
  (ncr_id, operation_id, date_key, station_key, failure_code_key, disposition, capa_flag, severity)
SELECT ncr_id, operation_id, substr(created_at, 1, 10), station_id, failure_code,
       COALESCE(disposition, 'pending'), capa_flag, severity
FROM ncr;

DELETE FROM fact_inspection_result;
INSERT INTO fact_inspection_result (operation_id, date_key, station_key, result, failure_code_key)
SELECT operation_id, substr(at, 1, 10), station_id, result, failure_code
FROM inspection_result;

DELETE FROM fact_equipment_downtime;
INSERT INTO fact_equipment_downtime
  (downtime_id, date_key, station_key, equipment_key, duration_min, reason)
SELECT downtime_id, substr(start_at, 1, 10), station_id, equipment_id, duration_min, reason
FROM equipment_downtime
WHERE duration_min IS NOT NULL;

DELETE FROM fact_material_consumption;
INSERT INTO fact_material_consumption
  (consumption_id, date_key, station_key, material_key, supplier_key, lot_id, qty)
SELECT mc.consumption_id, substr(mc.at, 1, 10), mc.station_id, mc.material_id,
       rm.supplier_id, mc.lot_id, mc.qty
FROM material_consumption mc
JOIN raw_material rm ON rm.material_id = mc.material_id;

DELETE FROM fact_change_package;
INSERT INTO fact_change_package (change_key, package_id, station_key, created_date_key, status, kind)
SELECT cp.package_id || ':' || cps.station_id, cp.package_id, cps.station_id,
       substr(cp.created_at, 1, 10), cp.status, 'change_package'
FROM change_package cp
JOIN change_package_station cps ON cps.package_id = cp.package_id;
INSERT INTO fact_change_package (change_key, package_id, station_key, created_date_key, status, kind)
SELECT br.revision_id || ':' || brs.station_id, br.revision_id, brs.station_id,
       substr(br.at, 1, 10), 'Released', 'bop_revision'
FROM bop_revision br
JOIN bop_revision_step brs ON brs.revision_id = br.revision_id;

DELETE FROM fact_spc_sample;
INSERT INTO fact_spc_sample
  (sample_id, date_key, station_key, characteristic, value, lsl, usl, in_control)
SELECT sample_id, substr(at, 1, 10), station_id, characteristic, value, lsl, usl, in_control
FROM spc_sample;
";
