//! Built-in sequence templates. Each declares the gate length `t` (µs), the
//! reference power `p0` (mW) and the RF frequency `nu` (MHz).

/// RF in DD windows 1 and 3 only, `t/4` each.
pub const QUANTIFY: &str = "\
param t = 400
param p0 = 80
param power = p0
param nu = 6
laser
mw flip=pi/2 phase=x
rf freq=nu power=power dur=t/4
dd flip=pi phase=x
delay dur=t/2
dd flip=pi phase=y
rf freq=nu power=power dur=t/4
mw flip=pi/2 phase=x
measure
";

/// RF in all three windows with durations `1 : 2 : w3`.
pub const COMPENSATE: &str = "\
param t = 1000
param p0 = 80
param power = p0
param nu = 6
param w3 = 1
laser
mw flip=pi/2 phase=x
rf freq=nu power=power dur=t/4
dd flip=pi phase=x
rf freq=nu power=power dur=t/2
dd flip=pi phase=y
rf freq=nu power=power dur=w3*t/4
mw flip=pi/2 phase=x
measure
";

/// DD echo without RF: windows `t/4`, `t/2`, `t/4` of free evolution.
pub const ECHO: &str = "\
param t = 1000
laser
mw flip=pi/2 phase=x
delay dur=t/4
dd flip=pi phase=x
delay dur=t/2
dd flip=pi phase=y
delay dur=t/4
mw flip=pi/2 phase=x
measure
";

/// Hard-pulse Ramsey free induction decay with delay `t`.
pub const RAMSEY: &str = "\
param t = 0
laser
mw flip=pi/2 phase=x
delay dur=t
mw flip=pi/2 phase=x
measure
";

pub fn by_name(name: &str) -> Option<&'static str> {
    match name {
        "quantify" => Some(QUANTIFY),
        "compensate" => Some(COMPENSATE),
        "echo" => Some(ECHO),
        "ramsey" => Some(RAMSEY),
        _ => None,
    }
}
