//! File emission: fixed-format numbers, CSV, atomic writes and the run manifest.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

/// `printf("%.9g")`: 9 significant digits, trailing zeros removed, exponent
/// form outside `1e-4 ≤ |v| < 1e9`.
pub fn fmt_g9(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    const P: i32 = 9;
    let sci = format!("{:.*e}", (P - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let x: i32 = exp.parse().expect("integer exponent");
    if (-4..P).contains(&x) {
        let fixed = format!("{:.*}", (P - 1 - x) as usize, v);
        trim_zeros(&fixed).to_string()
    } else {
        let m = trim_zeros(mantissa);
        let sign = if x < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", x.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Two-column CSV with header, LF endings.
pub fn csv_two_columns(header: (&str, &str), x: &[f64], y: &[f64]) -> String {
    let mut out = format!("{},{}\n", header.0, header.1);
    for (a, b) in x.iter().zip(y) {
        out.push_str(&fmt_g9(*a));
        out.push(',');
        out.push_str(&fmt_g9(*b));
        out.push('\n');
    }
    out
}

#[derive(Debug)]
pub struct CsvData {
    pub header: Vec<String>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Reads `t_us,<value>` data. The first line must be a header.
pub fn read_csv(text: &str) -> Result<CsvData, String> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, head) = lines.next().ok_or("empty CSV")?;
    let header: Vec<String> = head.split(',').map(|s| s.trim().to_string()).collect();
    if header.len() < 2 {
        return Err(format!("header needs two columns, found `{head}`"));
    }
    if header[0].parse::<f64>().is_ok() {
        return Err("first line must be a header such as `t_us,p0`".into());
    }
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (i, line) in lines {
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != header.len() {
            return Err(format!("line {}: expected {} columns, found {}", i + 1, header.len(), cols.len()));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| format!("line {}: `{s}` is not a number", i + 1));
        x.push(num(cols[0])?);
        y.push(num(cols[1])?);
    }
    Ok(CsvData { header, x, y })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Writes files under one directory and remembers their checksums.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<FileEntry>,
}

impl OutputDir {
    pub fn create(root: PathBuf) -> io::Result<Self> {
        fs::create_dir_all(&root)?;
        Ok(Self { root, files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> io::Result<()> {
        write_atomic(&self.root.join(name), contents)?;
        self.files.push(FileEntry { path: name.into(), bytes: contents.len(), sha256: sha256_hex(contents) });
        Ok(())
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }
}

/// Writes to a sibling temporary file, then renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

#[derive(Debug, Serialize)]
pub struct RunManifest<'a, P: Serialize> {
    pub command: String,
    pub config_path: Option<String>,
    pub parameters: &'a P,
    pub output_dir: String,
    pub tool_version: &'static str,
    pub wall_clock_s: f64,
    pub files: &'a [FileEntry],
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g9_matches_printf() {
        // reference strings from C printf("%.9g")
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (0.5, "0.5"),
            (800.0, "800"),
            (0.309724459710317, "0.30972446"),
            (2438.739, "2438.739"),
            (1.0 / 3.0, "0.333333333"),
            (1e-5, "1e-05"),
            (0.0001234, "0.0001234"),
            (123456789.0, "123456789"),
            (1234567890.0, "1.23456789e+09"),
            (-2.5e-7, "-2.5e-07"),
            (9.9999999996, "10"),
            (0.99999999996, "1"),
        ];
        for (v, want) in cases {
            assert_eq!(fmt_g9(v), want, "{v}");
        }
    }

    #[test]
    fn csv_round_trip() {
        let text = csv_two_columns(("t_us", "p0"), &[0.0, 10.0], &[1.0, 0.25]);
        assert_eq!(text, "t_us,p0\n0,1\n10,0.25\n");
        let d = read_csv(&text).unwrap();
        assert_eq!(d.x, vec![0.0, 10.0]);
        assert_eq!(d.y, vec![1.0, 0.25]);
        assert!(read_csv("1,2\n3,4\n").is_err());
        assert!(read_csv("t_us,p0\n1,abc\n").is_err());
        assert!(read_csv("t_us,p0\n1\n").is_err());
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
