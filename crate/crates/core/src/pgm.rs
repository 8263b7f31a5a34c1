//! Minimal PGM (P2 ASCII / P5 binary) reader and P5 writer.

use std::io::Write;

use crate::error::{Error, Result};

/// Grayscale raster, row 0 at the top of the image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub data: Vec<u16>,
}

impl Pgm {
    pub fn get(&self, col: usize, row: usize) -> u16 {
        self.data[row * self.width + col]
    }

    /// Parses a P2 or P5 image. Errors carry the byte offset of the problem.
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic = cur.token()?;
        let binary = match magic.as_slice() {
            b"P2" => false,
            b"P5" => true,
            _ => {
                return Err(Error::Pgm {
                    offset: 0,
                    reason: "expected magic P2 or P5".into(),
                })
            }
        };
        let width = cur.number()?;
        let height = cur.number()?;
        let maxval_at = cur.pos;
        let maxval = cur.number()?;
        if maxval == 0 || maxval > 65535 {
            return Err(Error::Pgm {
                offset: maxval_at,
                reason: format!("maxval {maxval} outside 1..=65535"),
            });
        }
        if width == 0 || height == 0 {
            return Err(Error::Pgm {
                offset: maxval_at,
                reason: "zero image dimension".into(),
            });
        }
        let n = width * height;
        let mut data = Vec::with_capacity(n);
        if binary {
            // exactly one whitespace byte separates the header from the raster
            if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
                return Err(Error::Pgm {
                    offset: cur.pos,
                    reason: "missing whitespace before raster".into(),
                });
            }
            let start = cur.pos + 1;
            let bpp = if maxval < 256 { 1 } else { 2 };
            let need = n * bpp;
            if bytes.len() < start + need {
                return Err(Error::Pgm {
                    offset: bytes.len(),
                    reason: format!("raster truncated: need {need} bytes after offset {start}"),
                });
            }
            for k in 0..n {
                let v = if bpp == 1 {
                    bytes[start + k] as u16
                } else {
                    u16::from_be_bytes([bytes[start + 2 * k], bytes[start + 2 * k + 1]])
                };
                if v as usize > maxval {
                    return Err(Error::Pgm {
                        offset: start + k * bpp,
                        reason: format!("sample {v} exceeds maxval {maxval}"),
                    });
                }
                data.push(v);
            }
        } else {
            for _ in 0..n {
                let at = cur.skip_ws();
                let v = cur.number()?;
                if v > maxval {
                    return Err(Error::Pgm {
                        offset: at,
                        reason: format!("sample {v} exceeds maxval {maxval}"),
                    });
                }
                data.push(v as u16);
            }
        }
        Ok(Self {
            width,
            height,
            maxval: maxval as u16,
            data,
        })
    }

    /// Writes an 8-bit P5 image with an optional header comment.
    pub fn write_p5<W: Write>(
        out: &mut W,
        width: usize,
        height: usize,
        data: &[u8],
        comment: Option<&str>,
    ) -> std::io::Result<()> {
        assert_eq!(data.len(), width * height, "raster size mismatch");
        write!(out, "P5\n")?;
        if let Some(c) = comment {
            for line in c.lines() {
                writeln!(out, "# {line}")?;
            }
        }
        write!(out, "{width} {height}\n255\n")?;
        out.write_all(data)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    /// Skips whitespace and `#` comments; returns the new position.
    fn skip_ws(&mut self) -> usize {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
        self.pos
    }

    fn token(&mut self) -> Result<Vec<u8>> {
        let start = self.skip_ws();
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Pgm {
                offset: start,
                reason: "unexpected end of header".into(),
            });
        }
        Ok(self.bytes[start..self.pos].to_vec())
    }

    fn number(&mut self) -> Result<usize> {
        let start = self.skip_ws();
        let tok = self.token()?;
        std::str::from_utf8(&tok)
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| Error::Pgm {
                offset: start,
                reason: format!(
                    "expected a decimal number, found {:?}",
                    String::from_utf8_lossy(&tok)
                ),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_ascii_with_comments() {
        let img = Pgm::parse(b"P2\n# hello\n3 2\n# mid\n255\n0 128 255\n1 2 3\n").unwrap();
        assert_eq!((img.width, img.height, img.maxval), (3, 2, 255));
        assert_eq!(img.data, vec![0, 128, 255, 1, 2, 3]);
    }

    #[test]
    fn binary_round_trip() {
        let mut buf = Vec::new();
        Pgm::write_p5(&mut buf, 2, 2, &[0, 50, 100, 255], Some("0 = free")).unwrap();
        let img = Pgm::parse(&buf).unwrap();
        assert_eq!(img.data, vec![0, 50, 100, 255]);
    }

    #[test]
    fn reports_offsets() {
        match Pgm::parse(b"P7\n1 1\n255\n0") {
            Err(Error::Pgm { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("{other:?}"),
        }
        match Pgm::parse(b"P2\n2 x\n255\n0 0") {
            Err(Error::Pgm { offset, .. }) => assert_eq!(offset, 5),
            other => panic!("{other:?}"),
        }
        match Pgm::parse(b"P5\n4 4\n255\n\x00\x01") {
            Err(Error::Pgm { offset, .. }) => assert_eq!(offset, 13),
            other => panic!("{other:?}"),
        }
    }
}
