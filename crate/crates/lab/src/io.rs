// Copyright 2026 The zo-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! File formats: dataset CSV (`x0..xp-1,y0..yc-1` header) and trajectory CSV
//! (`step,loss,lambda_max,trace,precond_trace,precond_lambda_max,relcomm`,
//! with absent fields left empty).

use std::io::{Read, Write};

use zo_core::objective::{Dataset, TargetKind};
use zo_core::optimizer::TrajectoryRecord;

use crate::LabError;

pub fn write_dataset_csv<W: Write>(w: W, data: &Dataset) -> Result<(), LabError> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = Vec::with_capacity(data.p + data.c);
    for j in 0..data.p {
        header.push(format!("x{j}"));
    }
    for j in 0..data.c {
        header.push(format!("y{j}"));
    }
    wtr.write_record(&header)?;
    for i in 0..data.n {
        let mut row = Vec::with_capacity(data.p + data.c);
        for v in data.input_row(i) {
            row.push(format!("{v}"));
        }
        for v in data.target_row(i) {
            row.push(format!("{v}"));
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_dataset_csv<R: Read>(r: R, kind: TargetKind) -> Result<Dataset, LabError> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    let p = header.iter().filter(|h| h.starts_with('x')).count();
    let c = header.iter().filter(|h| h.starts_with('y')).count();
    if p == 0 || c == 0 || p + c != header.len() {
        return Err(LabError::Parse(format!(
            "dataset header must be x0..x{{p-1}},y0..y{{c-1}}, got {header:?}"
        )));
    }
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    let mut n = 0usize;
    for record in rdr.records() {
        let record = record?;
        if record.len() != p + c {
            return Err(LabError::Parse(format!("row {n} has {} fields, expected {}", record.len(), p + c)));
        }
        for k in 0..p {
            inputs.push(
                record[k].parse::<f64>().map_err(|e| LabError::Parse(format!("row {n}: {e}")))?,
            );
        }
        for k in 0..c {
            targets.push(
                record[p + k].parse::<f64>().map_err(|e| LabError::Parse(format!("row {n}: {e}")))?,
            );
        }
        n += 1;
    }
    Dataset::new(inputs, targets, n, p, c, kind).map_err(LabError::Core)
}

/// Trajectory CSV with loss every step and curvature columns filled on
/// snapshot rows.
pub fn write_trajectory_csv<W: Write>(w: W, record: &TrajectoryRecord) -> Result<(), LabError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "step",
        "loss",
        "lambda_max",
        "trace",
        "precond_trace",
        "precond_lambda_max",
        "relcomm",
    ])?;
    let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for log in &record.steps {
        let snap = record.snapshots.iter().find(|s| s.step == log.step);
        let (lam, tr, ptr, plam, rc) = match snap {
            Some(s) => (
                Some(s.lambda_max),
                Some(s.trace),
                s.precond_trace,
                s.precond_lambda_max,
                s.relcomm,
            ),
            None => (None, None, None, None, None),
        };
        wtr.write_record([
            log.step.to_string(),
            format!("{}", log.loss),
            fmt_opt(lam),
            fmt_opt(tr),
            fmt_opt(ptr),
            fmt_opt(plam),
            fmt_opt(rc),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use zo_core::objective::{make_synthetic_dataset, DatasetKind};
    use zo_core::rng::RngStream;

    #[test]
    fn dataset_csv_round_trip() {
        let data =
            make_synthetic_dataset(10, 3, 2, DatasetKind::GaussianClusters, &RngStream::new(1, 0))
                .unwrap();
        let mut buf = Vec::new();
        write_dataset_csv(&mut buf, &data).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x0,x1,x2,y0,y1\n"), "{}", &text[..40]);
        let back = read_dataset_csv(buf.as_slice(), TargetKind::OneHot).unwrap();
        assert_eq!(back.n, 10);
        assert_eq!(back.p, 3);
        assert_eq!(back.c, 2);
        assert_eq!(back.inputs, data.inputs);
        assert_eq!(back.targets, data.targets);
    }

    #[test]
    fn rejects_malformed_header() {
        let text = "a,b\n1,2\n";
        assert!(read_dataset_csv(text.as_bytes(), TargetKind::Regression).is_err());
    }
}
