use std::io::{self, Write};

use super::PacketEvent;

pub const TRACE_HEADER: &str = "t,r,h,admissible,accepted,interference,success";

fn flag(b: bool) -> u8 {
    b as u8
}

/// One CSV row per packet; reals carry 17 significant digits, flags are 0/1
/// and `r` is empty for packets without a location.
pub fn write_trace<W: Write>(events: &[PacketEvent], mut out: W) -> io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for e in events {
        let r = e.r.map(|r| format!("{r:.16e}")).unwrap_or_default();
        writeln!(
            out,
            "{:.16e},{},{:.16e},{},{},{:.16e},{}",
            e.t,
            r,
            e.h,
            flag(e.admissible),
            flag(e.accepted),
            e.interference,
            flag(e.success)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::generate_schedule;

    #[test]
    fn rows_round_trip_exactly() {
        let mut ev = generate_schedule(&[0.1, 1.0 / 3.0]);
        ev[0].r = Some(std::f64::consts::PI);
        ev[1].interference = 2.0f64.sqrt();
        ev[1].accepted = true;
        let mut buf = Vec::new();
        write_trace(&ev, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], TRACE_HEADER);
        let first: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(first[1].parse::<f64>().unwrap(), std::f64::consts::PI);
        let second: Vec<&str> = lines[2].split(',').collect();
        assert_eq!(second[0].parse::<f64>().unwrap(), 1.0 / 3.0);
        assert_eq!(second[1], "");
        assert_eq!(second[4], "1");
        assert_eq!(second[5].parse::<f64>().unwrap(), 2.0f64.sqrt());
    }
}
