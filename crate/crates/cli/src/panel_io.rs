//! Long-format panel CSV: one row per user and day.

use std::collections::BTreeMap;
use std::path::Path;

use abtime_core::{UserPanel, UserRecord};
use anyhow::{bail, Context, Result};
use serde::Deserialize;

use crate::output::{num, write_csv};

pub const HEADER: [&str; 5] = ["user_id", "w", "e", "day", "increment"];

#[derive(Debug, Deserialize)]
struct Row {
    user_id: u64,
    w: u8,
    e: f64,
    day: u32,
    increment: f64,
}

pub fn write_panel(path: &Path, panel: &UserPanel) -> Result<()> {
    let mut rows = Vec::with_capacity(panel.len() * panel.horizon() as usize);
    for user in panel.users() {
        for (day, inc) in user.increments.iter().enumerate() {
            rows.push(vec![
                user.id.to_string(),
                u8::from(user.treated).to_string(),
                num(user.exposure),
                day.to_string(),
                num(*inc),
            ]);
        }
    }
    write_csv(path, &HEADER, &rows)
}

/// Reads a panel. The horizon is one past the largest day seen; days a user
/// has no row for count as zero increments.
pub fn read_panel(path: &Path) -> Result<UserPanel> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("opening panel {}", path.display()))?;
    if reader.headers()?.iter().ne(HEADER) {
        bail!("panel header must be {}", HEADER.join(","));
    }
    let mut users: BTreeMap<u64, (bool, f64, BTreeMap<u32, f64>)> = BTreeMap::new();
    let mut horizon = 0u32;
    for (line, row) in reader.deserialize::<Row>().enumerate() {
        let row = row.with_context(|| format!("panel row {}", line + 2))?;
        if row.w > 1 {
            bail!("panel row {}: w must be 0 or 1", line + 2);
        }
        let treated = row.w == 1;
        let entry = users
            .entry(row.user_id)
            .or_insert_with(|| (treated, row.e, BTreeMap::new()));
        if entry.0 != treated || entry.1 != row.e {
            bail!("user {} has inconsistent w or e", row.user_id);
        }
        if entry.2.insert(row.day, row.increment).is_some() {
            bail!("user {} has day {} twice", row.user_id, row.day);
        }
        horizon = horizon.max(row.day + 1);
    }
    let records = users
        .into_iter()
        .map(|(id, (treated, exposure, days))| {
            let mut increments = vec![0.0; horizon as usize];
            for (d, v) in days {
                increments[d as usize] = v;
            }
            UserRecord {
                id,
                treated,
                exposure,
                increments,
            }
        })
        .collect();
    UserPanel::new(horizon, records).context("invalid panel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let panel = UserPanel::new(
            3,
            vec![
                UserRecord {
                    id: 7,
                    treated: true,
                    exposure: 0.5,
                    increments: vec![0.25, 1.0, -2.0],
                },
                UserRecord {
                    id: 2,
                    treated: false,
                    exposure: 2.0,
                    increments: vec![0.0, 0.0, 3.5],
                },
            ],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("panel.csv");
        write_panel(&path, &panel).unwrap();
        let back = read_panel(&path).unwrap();
        assert_eq!(back.len(), 2);
        let mut users: Vec<_> = back
            .users()
            .map(|u| (u.id, u.treated, u.exposure, u.increments.to_vec()))
            .collect();
        users.sort_by_key(|u| u.0);
        assert_eq!(users[0], (2, false, 2.0, vec![0.0, 0.0, 3.5]));
        assert_eq!(users[1], (7, true, 0.5, vec![0.25, 1.0, -2.0]));
    }

    #[test]
    fn rejects_inconsistent_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(
            &path,
            "user_id,w,e,day,increment\n1,1,0.5,0,1\n1,0,0.5,1,1\n",
        )
        .unwrap();
        assert!(read_panel(&path).is_err());
        std::fs::write(&path, "user,w,e,day,increment\n").unwrap();
        assert!(read_panel(&path).is_err());
    }
}
