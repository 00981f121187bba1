use crate::error::Result;
use crate::model::{BusId, MeterKind, MeterSet, PowerNetwork};
use crate::scalar::Scalar;

/// The DC measurement matrix H: one row per meter (canonical meter order),
/// one column per non-reference bus (ascending id), reference angle fixed 0.
///
/// Flow meter on line (i,j), i < j: +1/x at column i, -1/x at column j.
/// Injection meter at bus b: sum over incident lines (b,k) of the flow row
/// oriented out of b.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
    meter_ids: Vec<String>,
    col_buses: Vec<BusId>,
}

impl<T: Scalar> JacobianMatrix<T> {
    pub fn build(network: &PowerNetwork<T>, meters: &MeterSet<T>) -> Result<Self> {
        let col_buses = network.state_buses();
        let cols = col_buses.len();
        let mut data = vec![T::zero(); meters.len() * cols];
        let mut meter_ids = Vec::with_capacity(meters.len());
        for (r, meter) in meters.meters().iter().enumerate() {
            meter_ids.push(meter.id.clone());
            let row = &mut data[r * cols..(r + 1) * cols];
            match &meter.kind {
                MeterKind::Flow { from, to } => {
                    let li = network.line_idx(*from, *to)?;
                    let line = network.line(li);
                    let w = T::one() / line.reactance;
                    if let Some(c) = network.state_col(line.from) {
                        row[c] = row[c] + w;
                    }
                    if let Some(c) = network.state_col(line.to) {
                        row[c] = row[c] - w;
                    }
                }
                MeterKind::Injection { bus } => {
                    let bi = network.bus_idx(*bus)?;
                    for &(nb, li) in network.adjacent(bi) {
                        let w = T::one() / network.line(li).reactance;
                        if let Some(c) = network.state_col(*bus) {
                            row[c] = row[c] + w;
                        }
                        if let Some(c) = network.state_col(network.bus_id(nb)) {
                            row[c] = row[c] - w;
                        }
                    }
                }
            }
        }
        Ok(Self {
            rows: meters.len(),
            cols,
            data,
            meter_ids,
            col_buses,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn meter_ids(&self) -> &[String] {
        &self.meter_ids
    }

    pub fn col_buses(&self) -> &[BusId] {
        &self.col_buses
    }

    pub fn row_of_meter(&self, id: &str) -> Option<usize> {
        self.meter_ids.iter().position(|m| m == id)
    }

    /// H * theta.
    pub fn mul_state(&self, theta: &[T]) -> Vec<T> {
        assert_eq!(theta.len(), self.cols);
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(theta)
                    .map(|(&h, &t)| h * t)
                    .sum::<T>()
            })
            .collect()
    }

    /// Restriction to a subset of rows, preserving order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        let mut meter_ids = Vec::with_capacity(rows.len());
        for &r in rows {
            data.extend_from_slice(self.row(r));
            meter_ids.push(self.meter_ids[r].clone());
        }
        Self {
            rows: rows.len(),
            cols: self.cols,
            data,
            meter_ids,
            col_buses: self.col_buses.clone(),
        }
    }

    /// Dense copy of the entries, row-major.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Bus, Line, Meter};

    fn net2() -> PowerNetwork<f64> {
        PowerNetwork::new(
            vec![
                Bus { id: 1, is_reference: true },
                Bus { id: 2, is_reference: false },
            ],
            vec![Line { from: 1, to: 2, reactance: 0.5 }],
        )
        .unwrap()
    }

    #[test]
    fn two_bus_flow_row() {
        let net = net2();
        let ms = MeterSet::new(
            &net,
            vec![Meter {
                id: "m".into(),
                kind: MeterKind::Flow { from: 1, to: 2 },
                cost: 1.0,
                secured: false,
            }],
        )
        .unwrap();
        let h = JacobianMatrix::build(&net, &ms).unwrap();
        assert_eq!((h.rows(), h.cols()), (1, 1));
        assert!((h.get(0, 0) - (-2.0)).abs() < 1e-12);
    }

    #[test]
    fn three_bus_injection_row() {
        // path 1(R) - 2 - 3, unit reactances, injection at bus 2
        let net = PowerNetwork::new(
            vec![
                Bus { id: 1, is_reference: true },
                Bus { id: 2, is_reference: false },
                Bus { id: 3, is_reference: false },
            ],
            vec![
                Line { from: 1, to: 2, reactance: 1.0 },
                Line { from: 2, to: 3, reactance: 1.0 },
            ],
        )
        .unwrap();
        let ms = MeterSet::new(
            &net,
            vec![Meter {
                id: "inj".into(),
                kind: MeterKind::Injection { bus: 2 },
                cost: 1.0,
                secured: false,
            }],
        )
        .unwrap();
        let h = JacobianMatrix::build(&net, &ms).unwrap();
        assert_eq!(h.row(0), &[2.0, -1.0]);
    }
}
