//! Event log sink with CSV and binary serializations.
//!
//! Binary layout (little-endian): magic `HSBGELOG`, `u32` version, `u64`
//! record count, then per record `u64 index, f64 time, u8 kind (0 pair,
//! 1 wall), u32 i, u32 j (u32::MAX for wall), 12 x f64` velocities in the
//! order pre_i, post_i, pre_j, post_j.

use super::engine::{EventRecord, LoggedKind, Observer};
use crate::error::{Error, Result};
use crate::vec3::Vec3;
use std::io::{Read, Write};

pub const LOG_MAGIC: &[u8; 8] = b"HSBGELOG";
pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Default, Clone, PartialEq)]
pub struct EventLog {
    pub records: Vec<EventRecord>,
}

impl Observer for EventLog {
    fn on_event(&mut self, rec: &EventRecord) {
        self.records.push(*rec);
    }
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "event_index,time,kind,i,j,pre_i_x,pre_i_y,pre_i_z,post_i_x,post_i_y,post_i_z,pre_j_x,pre_j_y,pre_j_z,post_j_x,post_j_y,post_j_z"
        )?;
        for r in &self.records {
            let kind = match r.kind {
                LoggedKind::Pair => "pair",
                LoggedKind::Wall => "wall",
            };
            let j = r.j.map(|j| j.to_string()).unwrap_or_default();
            write!(w, "{},{:e},{},{},{}", r.index, r.time, kind, r.i, j)?;
            for v in [r.pre_i, r.post_i, r.pre_j, r.post_j] {
                write!(w, ",{:e},{:e},{:e}", v[0], v[1], v[2])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(LOG_MAGIC)?;
        w.write_all(&LOG_VERSION.to_le_bytes())?;
        w.write_all(&(self.records.len() as u64).to_le_bytes())?;
        for r in &self.records {
            w.write_all(&r.index.to_le_bytes())?;
            w.write_all(&r.time.to_le_bytes())?;
            w.write_all(&[match r.kind {
                LoggedKind::Pair => 0u8,
                LoggedKind::Wall => 1u8,
            }])?;
            w.write_all(&r.i.to_le_bytes())?;
            w.write_all(&r.j.unwrap_or(u32::MAX).to_le_bytes())?;
            for v in [r.pre_i, r.post_i, r.pre_j, r.post_j] {
                for c in v.0 {
                    w.write_all(&c.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != LOG_MAGIC {
            return Err(Error::Format("not an event log".into()));
        }
        let version = u32::from_le_bytes(read_n(&mut r)?);
        if version != LOG_VERSION {
            return Err(Error::Format(format!("unsupported event log version {version}")));
        }
        let count = u64::from_le_bytes(read_n(&mut r)?);
        let mut records = Vec::with_capacity(count.min(1 << 20) as usize);
        for _ in 0..count {
            let index = u64::from_le_bytes(read_n(&mut r)?);
            let time = f64::from_le_bytes(read_n(&mut r)?);
            let [kind] = read_n::<1>(&mut r)?;
            let kind = match kind {
                0 => LoggedKind::Pair,
                1 => LoggedKind::Wall,
                k => return Err(Error::Format(format!("unknown event kind {k}"))),
            };
            let i = u32::from_le_bytes(read_n(&mut r)?);
            let j = u32::from_le_bytes(read_n(&mut r)?);
            let mut v = [Vec3::ZERO; 4];
            for slot in &mut v {
                for k in 0..3 {
                    slot.0[k] = f64::from_le_bytes(read_n(&mut r)?);
                }
            }
            records.push(EventRecord {
                index,
                time,
                kind,
                i,
                j: (j != u32::MAX).then_some(j),
                pre_i: v[0],
                post_i: v[1],
                pre_j: v[2],
                post_j: v[3],
            });
        }
        Ok(EventLog { records })
    }
}

fn read_n<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| Error::Format(format!("truncated event log: {e}")))?;
    Ok(b)
}
