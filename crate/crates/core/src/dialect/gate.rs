use std::fmt;

/// The standard gate library shared by both quantum dialects.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GateKind {
    I,
    H,
    X,
    Y,
    Z,
    S,
    Sdg,
    T,
    Tdg,
    Sx,
    Sxdg,
    Swap,
    Rx,
    Ry,
    Rz,
    P,
    U,
}

impl GateKind {
    pub const ALL: [GateKind; 17] = [
        GateKind::I,
        GateKind::H,
        GateKind::X,
        GateKind::Y,
        GateKind::Z,
        GateKind::S,
        GateKind::Sdg,
        GateKind::T,
        GateKind::Tdg,
        GateKind::Sx,
        GateKind::Sxdg,
        GateKind::Swap,
        GateKind::Rx,
        GateKind::Ry,
        GateKind::Rz,
        GateKind::P,
        GateKind::U,
    ];

    pub fn mnemonic(self) -> &'static str {
        match self {
            GateKind::I => "i",
            GateKind::H => "h",
            GateKind::X => "x",
            GateKind::Y => "y",
            GateKind::Z => "z",
            GateKind::S => "s",
            GateKind::Sdg => "sdg",
            GateKind::T => "t",
            GateKind::Tdg => "tdg",
            GateKind::Sx => "sx",
            GateKind::Sxdg => "sxdg",
            GateKind::Swap => "swap",
            GateKind::Rx => "rx",
            GateKind::Ry => "ry",
            GateKind::Rz => "rz",
            GateKind::P => "p",
            GateKind::U => "u",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<GateKind> {
        GateKind::ALL.into_iter().find(|k| k.mnemonic() == s)
    }

    pub fn num_qubits(self) -> usize {
        match self {
            GateKind::Swap => 2,
            _ => 1,
        }
    }

    pub fn num_params(self) -> usize {
        match self {
            GateKind::Rx | GateKind::Ry | GateKind::Rz | GateKind::P => 1,
            GateKind::U => 3,
            _ => 0,
        }
    }

    pub fn is_self_inverse(self) -> bool {
        matches!(
            self,
            GateKind::I | GateKind::H | GateKind::X | GateKind::Y | GateKind::Z | GateKind::Swap
        )
    }

    /// The kind whose matrix is the adjoint of this one, for parameter-free
    /// gates.
    pub fn named_inverse(self) -> Option<GateKind> {
        match self {
            k if k.is_self_inverse() => Some(k),
            GateKind::S => Some(GateKind::Sdg),
            GateKind::Sdg => Some(GateKind::S),
            GateKind::T => Some(GateKind::Tdg),
            GateKind::Tdg => Some(GateKind::T),
            GateKind::Sx => Some(GateKind::Sxdg),
            GateKind::Sxdg => Some(GateKind::Sx),
            _ => None,
        }
    }

    pub fn is_rotation(self) -> bool {
        matches!(self, GateKind::Rx | GateKind::Ry | GateKind::Rz | GateKind::P)
    }

    /// Period of each angle under which the matrix is exactly unchanged, and
    /// the (shorter) period under which it changes only by a global phase.
    pub(crate) fn angle_periods(self) -> &'static [(f64, f64)] {
        use std::f64::consts::PI;
        const ROT: [(f64, f64); 1] = [(4.0 * PI, 2.0 * PI)];
        const PHASE: [(f64, f64); 1] = [(2.0 * PI, 2.0 * PI)];
        const U3: [(f64, f64); 3] = [(4.0 * PI, 2.0 * PI), (2.0 * PI, 2.0 * PI), (2.0 * PI, 2.0 * PI)];
        match self {
            GateKind::Rx | GateKind::Ry | GateKind::Rz => &ROT,
            GateKind::P => &PHASE,
            GateKind::U => &U3,
            _ => &[],
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mnemonics_round_trip() {
        for k in GateKind::ALL {
            assert_eq!(GateKind::from_mnemonic(k.mnemonic()), Some(k));
        }
        assert_eq!(GateKind::from_mnemonic("cx"), None);
    }

    #[test]
    fn named_inverses_pair_up() {
        for k in GateKind::ALL {
            if let Some(inv) = k.named_inverse() {
                assert_eq!(inv.named_inverse(), Some(k));
                assert_eq!(inv.num_qubits(), k.num_qubits());
            }
            if k.is_self_inverse() {
                assert_eq!(k.num_params(), 0);
            }
        }
        assert_eq!(GateKind::T.named_inverse(), Some(GateKind::Tdg));
    }

    #[test]
    fn shapes() {
        assert_eq!((GateKind::Swap.num_qubits(), GateKind::Swap.num_params()), (2, 0));
        assert_eq!((GateKind::U.num_qubits(), GateKind::U.num_params()), (1, 3));
        assert!(GateKind::Rz.is_rotation() && !GateKind::H.is_rotation());
    }
}
