//! Conservative f64 interval arithmetic for sound pruning. Every bound is
//! widened outward by one ulp per operation, so a computed interval always
//! encloses the exact real result; a box whose interval excludes zero
//! provably contains no root.

use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi);
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    /// Encloses a rational: nearest f64 widened one ulp each way.
    pub fn from_rational(r: &Rational) -> Self {
        let x = r.to_f64();
        Interval {
            lo: x.next_down(),
            hi: x.next_up(),
        }
    }

    pub fn contains_zero(&self) -> bool {
        self.lo <= 0.0 && self.hi >= 0.0
    }

    pub fn add(self, o: Interval) -> Interval {
        Interval {
            lo: (self.lo + o.lo).next_down(),
            hi: (self.hi + o.hi).next_up(),
        }
    }

    pub fn mul(self, o: Interval) -> Interval {
        let candidates = [
            self.lo * o.lo,
            self.lo * o.hi,
            self.hi * o.lo,
            self.hi * o.hi,
        ];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in candidates {
            lo = lo.min(c);
            hi = hi.max(c);
        }
        Interval {
            lo: lo.next_down(),
            hi: hi.next_up(),
        }
    }

    /// Integer power; exact for exponent 0 and 1, widened otherwise.
    pub fn pow(self, e: u32) -> Interval {
        match e {
            0 => Interval::point(1.0),
            1 => self,
            _ => {
                let mut acc = self;
                for _ in 1..e {
                    acc = acc.mul(self);
                }
                acc
            }
        }
    }
}
