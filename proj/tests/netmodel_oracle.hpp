#ifndef NCP_TESTS_NETMODEL_ORACLE_HPP
#define NCP_TESTS_NETMODEL_ORACLE_HPP

// Independent re-derivation of the cost model used to cross-check
// ncp::cost. Deliberately written as one flat integer-arithmetic walk with
// no code shared with the implementation. Keep it dumb.

#include <array>

namespace ncp_test {

struct OracleTotals {
    long long macs = 0;
    long long params = 0;
};

struct OracleArch {
    int i1, i2;
    std::array<int, 4> blocks;                 // b1..b4
    std::array<std::array<int, 4>, 4> units;   // units[s][j], j < s+1
    std::array<std::array<int, 4>, 4> chans;   // chans[s][j]
    int o1;
};

inline OracleTotals oracle_cost(const OracleArch& a, int H, int W, int cin_img, int classes,
                                bool segmentation) {
    OracleTotals t;
    auto conv = [&](int k, int cin, int cout, long long area) {
        const long long w = static_cast<long long>(k) * k * cin * cout;
        t.macs += w * area;
        t.params += w;
    };
    auto res_unit = [&](int cin, int cout, long long area, bool strided) {
        conv(3, cin, cout, area);
        conv(3, cout, cout, area);
        if (strided || cin != cout) conv(1, cin, cout, area);
    };

    const long long area1 = static_cast<long long>(H / 4) * (W / 4);
    const std::array<long long, 4> area = {area1, area1 / 4, area1 / 16, area1 / 64};

    conv(3, cin_img, a.i1, static_cast<long long>(H / 2) * (W / 2));
    conv(3, a.i1, a.i2, area[0]);

    // Stage 1: no fusion cost; first unit projects the stem width.
    for (int blk = 0; blk < a.blocks[0]; ++blk)
        for (int u = 0; u < a.units[0][0]; ++u) {
            const bool first = (blk == 0 && u == 0);
            res_unit(first ? a.i2 : a.chans[0][0], a.chans[0][0], area[0], false);
        }

    // Stages 2..4.
    for (int s = 1; s < 4; ++s) {
        const int nbr = s + 1;
        for (int blk = 0; blk < a.blocks[s]; ++blk) {
            const bool transition = (blk == 0);
            const int in_branches = transition ? s : nbr;
            for (int j = 0; j < nbr; ++j) {
                const int cout = a.chans[s][j];
                // gather from j-1 (stride-2 down), j (same), j+1 (up at its own res)
                if (j - 1 >= 0 && j - 1 < in_branches) {
                    const int cin = transition ? a.chans[s - 1][j - 1] : a.chans[s][j - 1];
                    res_unit(cin, cout, area[j], true);
                }
                if (j < in_branches) {
                    const int cin = transition ? a.chans[s - 1][j] : a.chans[s][j];
                    res_unit(cin, cout, area[j], false);
                }
                if (j + 1 < in_branches) {
                    const int cin = transition ? a.chans[s - 1][j + 1] : a.chans[s][j + 1];
                    res_unit(cin, cout, area[j + 1], false);
                }
            }
            for (int j = 0; j < nbr; ++j)
                for (int u = 0; u < a.units[s][j]; ++u)
                    res_unit(a.chans[s][j], a.chans[s][j], area[j], false);
        }
    }

    int concat = 0;
    for (int j = 0; j < 4; ++j) concat += a.chans[3][j];
    if (segmentation) {
        conv(1, concat, a.o1, area[0]);
        conv(1, a.o1, classes, area[0]);
    } else {
        conv(1, concat, a.o1, area[3]);
        t.macs += static_cast<long long>(a.o1) * classes;
        t.params += static_cast<long long>(a.o1) * classes;
    }
    return t;
}

/// Uniform architecture {b,n=bn; all widths w}.
inline OracleArch oracle_uniform(int bn, int w) {
    OracleArch a{};
    a.i1 = a.i2 = a.o1 = w;
    for (int s = 0; s < 4; ++s) {
        a.blocks[static_cast<std::size_t>(s)] = bn;
        for (int j = 0; j <= s; ++j) {
            a.units[static_cast<std::size_t>(s)][static_cast<std::size_t>(j)] = bn;
            a.chans[static_cast<std::size_t>(s)][static_cast<std::size_t>(j)] = w;
        }
    }
    return a;
}

} // namespace ncp_test

#endif // NCP_TESTS_NETMODEL_ORACLE_HPP
