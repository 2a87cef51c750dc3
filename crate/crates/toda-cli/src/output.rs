use std::fs;
use std::io::Write;
use std::path::Path;

use toda::geometry::ScalarField;
use toda::solver::ContinuationRecord;

use crate::CliError;

pub const CSV_COLUMNS: [&str; 15] = [
    "eps", "F", "mean1", "mean2", "max1", "max2", "argmax1_x", "argmax1_y", "argmax2_x", "argmax2_y", "energy", "mass1",
    "mass2", "el_residual", "blowup_flag",
];

fn io(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn write_records(path: &Path, records: &[ContinuationRecord]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io(path, e))?;
    w.write_record(CSV_COLUMNS).map_err(|e| io(path, e))?;
    for r in records {
        let row = [
            r.eps,
            r.f_value,
            r.mean1,
            r.mean2,
            r.max1,
            r.max2,
            r.argmax1[0],
            r.argmax1[1],
            r.argmax2[0],
            r.argmax2[1],
            r.energy,
            r.mass1,
            r.mass2,
            r.el_residual,
        ];
        let mut fields: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        fields.push(u8::from(r.blowup_flag).to_string());
        w.write_record(&fields).map_err(|e| io(path, e))?;
    }
    w.flush().map_err(|e| io(path, e))
}

/// 16-bit binary graymap, row i of the grid (y = i/N) as image row i, linear in [min, max].
/// min and max go to `<path>.txt`.
pub fn export_heatmap(field: &ScalarField, path: &Path) -> Result<(), CliError> {
    let n = field.n();
    let (lo, hi) = (field.min(), field.max());
    let mut bytes = format!("P5\n{n} {n}\n65535\n").into_bytes();
    for &v in field.values() {
        let s = if hi > lo { ((v - lo) / (hi - lo) * 65535.0).round() as u16 } else { 0 };
        bytes.extend_from_slice(&s.to_be_bytes());
    }
    fs::write(path, bytes).map_err(|e| io(path, e))?;
    let side = path.with_extension("pgm.txt");
    let mut f = fs::File::create(&side).map_err(|e| io(&side, e))?;
    writeln!(f, "min {lo:e}\nmax {hi:e}").map_err(|e| io(&side, e))
}

pub fn write_json(path: &Path, v: &serde_json::Value) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| io(path, e))?;
    s.push('\n');
    fs::write(path, s).map_err(|e| io(path, e))
}
