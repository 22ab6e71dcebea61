//! Reference values from oracles/gen_reference.py (mpmath, 40 digits).

// (t, alpha, beta, log S, log f)
pub const GOMPERTZ: [[f64; 5]; 6] = [
    [0.7, -0.5, 1.2, -7.0874858467508769e-1, -8.7642702788113308e-1],
    [2.5, 0.3, 0.5, -1.8616666943544578, -1.8048138749144031],
    [10.0, -1.2, 0.3, -2.4999846394691167e-1, -1.3453971268272847e+1],
    [5.0, 2.0, 0.01, -1.1012732897403359e+2, -1.0473249916002168e+2],
    [7.972602739726027, -0.43705, 1.5644, -3.4696664631183475, -6.5065901266163856],
    [0.001, -0.8, 3.0, -2.9988003199360103e-3, 1.0948134883481737],
];
pub const INVERSE_GAUSSIAN: [[f64; 5]; 6] = [
    [0.5, -0.5, 1.0, -9.6158416156415852e-2, -1.4417177623647548],
    [3.0, 0.5, 2.0, -1.7976269361505825, -2.9342638898201433],
    [20.0, -1.0, 0.2, -4.5400960370489235e-5, -5.9732817987318606e+1],
    [0.05, 0.8, 0.1, -5.3134825543270432e-42, -8.7434047576376652e+1],
    [3.0, 1.5, 0.05, -4.4989441986620558e+1, -4.1902324162763173e+1],
    [1.0, -0.2, 5.0, -9.8970050622772936e-1, -1.8676574894217229],
];
pub const MARSHALL_OLKIN: [[f64; 7]; 6] = [
    [0.0, 0.7, -0.5, 1.2, 0.3, -1.4902394876922103, -1.2354360295894422],
    [0.0, 2.5, 0.3, 0.5, 2.0, -1.3129777052249324, -1.4005830772152976],
    [0.0, 7.972602739726027, -0.43705, 1.5644, 40.882, -5.6608770891612968e-1, -4.4101224865897355],
    [1.0, 0.5, -0.5, 1.0, 0.5, -1.8387610756505604e-1, -9.2400596462208985e-1],
    [1.0, 3.0, 0.5, 2.0, 4.3369, -7.7058893743844308e-1, -2.3473476995703091],
    [1.0, 20.0, -1.0, 0.2, 0.05, -9.0762780143698783e-4, -5.6738810167446748e+1],
];
pub const CURE: [[f64; 6]; 4] = [
    [0.0, -0.43705, 1.5644, 40.882, 2.7890946199066302e-2, 5.3979664119792359e-1],
    [0.0, -0.61249, 2.8796, 40.882, 9.0819666927345606e-3, 2.7256427512180801e-1],
    [1.0, -1.0, 0.5, 0.5, 9.8168436111126582e-1, 9.6402758007581688e-1],
    [1.0, -0.3, 2.0, 2.0, 2.5918177931828213e-1, 4.1166697862893552e-1],
];
// (x, log Phi(x))
pub const NORMAL_LOGCDF: [[f64; 2]; 6] = [
    [-40.0, -8.0460844201375379e+2],
    [-8.0, -3.501343715991455e+1],
    [-1.5, -2.7059444008238898],
    [0.0, -6.9314718055994531e-1],
    [2.0, -2.3012909328963488e-2],
    [9.0, -1.1285884059538406e-19],
];
// (p, Phi^-1(p))
pub const NORMAL_QUANTILE: [[f64; 2]; 5] = [
    [1e-10, -6.3613409024040562],
    [0.025, -1.9599639845400542],
    [0.3, -5.2440051270804082e-1],
    [0.975, 1.9599639845400539],
    [0.999999, 4.7534243088170878],
];
// (x, df, upper tail)
pub const CHI2_SF: [[f64; 3]; 4] = [
    [54.47015, 1.0, 1.5782705373000959e-13],
    [31.47173, 1.0, 2.0236517277318924e-8],
    [3.841458820694124, 1.0, 5.0000000000000057e-2],
    [10.0, 4.0, 4.0427681994512803e-2],
];
