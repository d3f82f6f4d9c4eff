use std::io::Write;

use super::{OracleError, WaveFunction};

pub const WAVEFUNCTION_HEADER: [&str; 4] = ["x", "re_psi", "im_psi", "abs_psi_sq"];

/// One row per grid point: `x, Re ψ, Im ψ, |ψ|²`.
pub fn write_wavefunction<W: Write>(psi: &WaveFunction, w: W) -> Result<(), OracleError> {
    let err = |e: csv::Error| OracleError::Io(e.to_string());
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    out.write_record(WAVEFUNCTION_HEADER).map_err(err)?;
    for (x, a) in psi.grid().points().zip(psi.amplitudes()) {
        out.write_record([
            x.to_string(),
            a.re.to_string(),
            a.im.to_string(),
            a.norm_sqr().to_string(),
        ])
        .map_err(err)?;
    }
    out.flush().map_err(|e| OracleError::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::Grid1D;

    #[test]
    fn rows_follow_the_grid() {
        let g = Grid1D::new(-1.0, 1.0, 16).unwrap();
        let psi = WaveFunction::gaussian(g, 0.0, 0.5, 1.0).unwrap();
        let mut buf = Vec::new();
        write_wavefunction(&psi, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "x,re_psi,im_psi,abs_psi_sq");
        assert_eq!(lines.len(), 17);
        assert!(lines[1].starts_with("-1,"));
    }
}
