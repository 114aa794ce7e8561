// Reference confusion matrices and their expected statistics for the three
// benchmark evaluations (chest X-ray CXrI, cranial MRI CMRI, skin SK), three
// methods each. Expected values are kept as printed strings so each carries
// its own rounding precision; the comparison tolerance is one unit in the
// last printed place.
#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace golden {

struct Block {
    std::string dataset;
    std::string method;
    std::vector<std::string> categories;
    std::vector<std::vector<std::int64_t>> counts;  // rows = actual
    // metric name -> printed value per category column
    std::vector<std::pair<std::string, std::vector<std::string>>> expected;
};

struct MacroRow {
    std::string dataset;
    // percentages: OA, FNR-M, FPR-M, TNR-M, OM
    double oa, fnr_m, fpr_m, tnr_m, om;
};

// |computed - printed| <= 10^-decimals (+ float-repr slack).
inline bool matches_printed(double computed, const std::string& printed) {
    const auto dot = printed.find('.');
    const int decimals = dot == std::string::npos ? 0 : static_cast<int>(printed.size() - dot - 1);
    const double tolerance = std::pow(10.0, -decimals) + 1e-12;
    return std::abs(computed - std::stod(printed)) <= tolerance;
}

inline const std::vector<Block>& blocks() {
    static const std::vector<Block> data = [] {
        std::vector<Block> v;

        const std::vector<std::string> cxri{"COV", "Nor", "Pne"};
        const std::vector<std::string> cmri{"MD", "MoD", "ND", "VMD"};
        const std::vector<std::string> sk{"CP", "Mea", "MP", "Nor"};

        v.push_back({"cxri", "eafp_med", cxri,
                     {{395, 54, 11}, {28, 424, 8}, {11, 65, 384}},
                     {{"ACC", {"0.9246", "0.8877", "0.9312"}},
                      {"AGF", {"0.9018", "0.9137", "0.8937"}},
                      {"AGM", {"0.9271", "0.8858", "0.9343"}},
                      {"AUC", {"0.9082", "0.8962", "0.9071"}},
                      {"BCD", {"0.0094", "0.0301", "0.0207"}},
                      {"BM", {"0.8163", "0.7924", "0.8141"}},
                      {"CEN", {"0.2786", "0.3413", "0.252"}},
                      {"F1", {"0.8837", "0.8455", "0.8899"}},
                      {"FNR", {"0.1413", "0.0783", "0.1652"}},
                      {"FPR", {"0.0424", "0.1294", "0.0207"}},
                      {"G", {"0.884", "0.8484", "0.8919"}},
                      {"MCC", {"0.8288", "0.7646", "0.8441"}},
                      {"OOC", {"0.884", "0.8484", "0.8919"}},
                      {"PPV", {"0.9101", "0.7809", "0.9529"}},
                      {"RACC", {"0.1048", "0.1312", "0.0973"}},
                      {"TNR", {"0.9576", "0.8707", "0.9794"}},
                      {"TPR", {"0.8587", "0.9217", "0.8348"}}}});

        v.push_back({"cxri", "swinv2_t", cxri,
                     {{448, 12, 0}, {6, 449, 5}, {2, 51, 407}},
                     {{"ACC", {"0.9855", "0.9464", "0.958"}},
                      {"AGF", {"0.9817", "0.965", "0.9288"}},
                      {"AGM", {"0.9861", "0.9447", "0.9607"}},
                      {"AUC", {"0.9826", "0.9538", "0.9397"}},
                      {"BCD", {"0.0015", "0.0188", "0.0174"}},
                      {"BM", {"0.9652", "0.9076", "0.8794"}},
                      {"CEN", {"0.0744", "0.1929", "0.1512"}},
                      {"F1", {"0.9782", "0.9239", "0.9335"}},
                      {"FNR", {"0.0261", "0.0239", "0.1152"}},
                      {"FPR", {"0.0087", "0.0685", "0.0054"}},
                      {"G", {"0.9781", "0.9251", "0.9349"}},
                      {"MCC", {"0.9673", "0.8857", "0.9058"}},
                      {"OOC", {"0.9781", "0.9251", "0.9349"}},
                      {"PPV", {"0.9825", "0.877", "0.9879"}},
                      {"RACC", {"0.1101", "0.1237", "0.0995"}},
                      {"TNR", {"0.9913", "0.9315", "0.9946"}},
                      {"TPR", {"0.9739", "0.9761", "0.8848"}}}});

        v.push_back({"cxri", "eafp_med_st", cxri,
                     {{460, 0, 0}, {0, 459, 1}, {0, 12, 448}},
                     {{"ACC", {"1", "0.9906", "0.9906"}},
                      {"AGF", {"1", "0.9948", "0.984"}},
                      {"AGM", {"1", "0.9902", "0.9914"}},
                      {"AUC", {"1", "0.9924", "0.9864"}},
                      {"BCD", {"0", "0.004", "0.004"}},
                      {"BM", {"1", "0.9848", "0.9728"}},
                      {"CEN", {"0", "0.0458", "0.0466"}},
                      {"F1", {"1", "0.986", "0.9857"}},
                      {"FNR", {"0", "0.0022", "0.0261"}},
                      {"FPR", {"0", "0.013", "0.0011"}},
                      {"G", {"1", "0.9861", "0.9858"}},
                      {"MCC", {"1", "0.9791", "0.9788"}},
                      {"OOC", {"1", "0.9861", "0.9858"}},
                      {"PPV", {"1", "0.9745", "0.9978"}},
                      {"RACC", {"0", "0.1138", "0.1085"}},
                      {"TNR", {"1", "0.987", "0.9989"}},
                      {"TPR", {"1", "0.9978", "0.9739"}}}});

        v.push_back({"cmri", "eafp_med", cmri,
                     {{745, 72, 230, 153}, {65, 1006, 83, 46}, {96, 25, 945, 134}, {171, 50, 411, 568}},
                     {{"ACC", {"0.836", "0.929", "0.796", "0.799"}},
                      {"AGF", {"0.7484", "0.8956", "0.8071", "0.6511"}},
                      {"AGM", {"0.818", "0.9235", "0.7956", "0.7634"}},
                      {"AUC", {"0.7643", "0.8988", "0.7932", "0.6904"}},
                      {"BCD", {"0.0128", "0.0049", "0.0489", "0.0312"}},
                      {"BM", {"0.5286", "0.7975", "0.5864", "0.3808"}},
                      {"CEN", {"0.5311", "0.2963", "0.4919", "0.5929"}},
                      {"F1", {"0.6544", "0.8551", "0.6588", "0.5407"}},
                      {"FNR", {"0.3792", "0.1617", "0.2125", "0.5267"}},
                      {"FPR", {"0.0922", "0.0408", "0.2011", "0.0925"}},
                      {"G", {"0.6553", "0.8553", "0.6678", "0.5463"}},
                      {"MCC", {"0.5487", "0.8083", "0.5332", "0.4223"}},
                      {"OOC", {"0.6553", "0.8553", "0.6678", "0.5463"}},
                      {"PPV", {"0.6917", "0.8725", "0.5662", "0.6304"}},
                      {"RACC", {"0.0561", "0.0601", "0.0869", "0.0469"}},
                      {"TNR", {"0.9077", "0.9592", "0.7988", "0.9075"}},
                      {"TPR", {"0.6208", "0.8383", "0.7875", "0.4733"}}}});

        v.push_back({"cmri", "swinv2_t", cmri,
                     {{1180, 0, 4, 16}, {0, 1199, 1, 0}, {29, 0, 1060, 111}, {48, 0, 38, 1114}},
                     {{"ACC", {"0.98", "0.9998", "0.9619", "0.9556"}},
                      {"AGF", {"0.9826", "0.9996", "0.9319", "0.9475"}},
                      {"AGM", {"0.98", "0.9998", "0.9573", "0.9542"}},
                      {"AUC", {"0.981", "0.9996", "0.9357", "0.9465"}},
                      {"BCD", {"0.0059", "0.0001", "0.0101", "0.0043"}},
                      {"BM", {"0.9619", "0.9992", "0.8714", "0.8931"}},
                      {"CEN", {"0.0963", "0.0018", "0.1582", "0.1761"}},
                      {"F1", {"0.9605", "0.9996", "0.9205", "0.9127"}},
                      {"FNR", {"0.0167", "0.0008", "0.1167", "0.0717"}},
                      {"FPR", {"0.0214", "0", "0.0119", "0.0353"}},
                      {"G", {"0.9608", "0.9996", "0.9214", "0.9129"}},
                      {"MCC", {"0.9474", "0.9994", "0.8969", "0.8832"}},
                      {"OOC", {"0.9608", "0.9996", "0.9214", "0.9129"}},
                      {"PPV", {"0.9387", "1", "0.961", "0.8977"}},
                      {"RACC", {"0.0655", "0.0625", "0.0575", "0.0646"}},
                      {"TNR", {"0.9786", "1", "0.9881", "0.9647"}},
                      {"TPR", {"0.9833", "0.9992", "0.8833", "0.9283"}}}});

        v.push_back({"cmri", "eafp_med_st", cmri,
                     {{1174, 0, 8, 18}, {0, 1200, 0, 0}, {9, 0, 1148, 43}, {7, 0, 30, 1163}},
                     {{"ACC", {"0.9913", "1", "0.9813", "0.9796"}},
                      {"AGF", {"0.9866", "1", "0.9725", "0.9768"}},
                      {"AGM", {"0.9906", "1", "0.98", "0.9791"}},
                      {"AUC", {"0.9869", "1", "0.9731", "0.9761"}},
                      {"BCD", {"0.001", "0", "0.0015", "0.0025"}},
                      {"BM", {"0.9739", "1", "0.9461", "0.9522"}},
                      {"CEN", {"0.0525", "0", "0.0935", "0.1"}},
                      {"F1", {"0.9824", "1", "0.9623", "0.9596"}},
                      {"FNR", {"0.0217", "0", "0.0433", "0.0308"}},
                      {"FPR", {"0.0044", "0", "0.0106", "0.0169"}},
                      {"G", {"0.9824", "1", "0.9623", "0.9596"}},
                      {"MCC", {"0.9766", "1", "0.9498", "0.946"}},
                      {"OOC", {"0.9824", "1", "0.9623", "0.9596"}},
                      {"PPV", {"0.9866", "1", "0.968", "0.9502"}},
                      {"RACC", {"0.062", "0.0625", "0.0618", "0.0638"}},
                      {"TNR", {"0.9956", "1", "0.9894", "0.9831"}},
                      {"TPR", {"0.9783", "1", "0.9567", "0.9692"}}}});

        v.push_back({"sk", "eafp_med", sk,
                     {{154, 26, 38, 22}, {28, 185, 12, 15}, {16, 19, 190, 15}, {10, 12, 17, 201}},
                     {{"ACC", {"0.8542", "0.8833", "0.8781", "0.9052"}},
                      {"AGF", {"0.7674", "0.8427", "0.8495", "0.8832"}},
                      {"AGM", {"0.8367", "0.8761", "0.8729", "0.9013"}},
                      {"AUC", {"0.7833", "0.8458", "0.8493", "0.8826"}},
                      {"BCD", {"0.0167", "0.001", "0.0089", "0.0068"}},
                      {"BM", {"0.5667", "0.6917", "0.6986", "0.7653"}},
                      {"CEN", {"0.5021", "0.4142", "0.4147", "0.3555"}},
                      {"F1", {"0.6875", "0.7676", "0.7646", "0.8154"}},
                      {"FNR", {"0.3583", "0.2291", "0.2083", "0.1625"}},
                      {"FPR", {"0.075", "0.0792", "0.0931", "0.0722"}},
                      {"G", {"0.6893", "0.7676", "0.765", "0.8157"}},
                      {"MCC", {"0.5956", "0.6898", "0.6832", "0.7522"}},
                      {"OOC", {"0.6893", "0.7676", "0.765", "0.8157"}},
                      {"PPV", {"0.7404", "0.7645", "0.7393", "0.7945"}},
                      {"RACC", {"0.0542", "0.063", "0.0669", "0.0659"}},
                      {"TNR", {"0.925", "0.9208", "0.9069", "0.9278"}},
                      {"TPR", {"0.6417", "0.7708", "0.7916", "0.8375"}}}});

        v.push_back({"sk", "swinv2_t", sk,
                     {{236, 2, 2, 0}, {3, 233, 1, 3}, {10, 4, 225, 1}, {1, 1, 1, 237}},
                     {{"ACC", {"0.9813", "0.9854", "0.9802", "0.9927"}},
                      {"AGF", {"0.9834", "0.9805", "0.9641", "0.9911"}},
                      {"AGM", {"0.9814", "0.9847", "0.9779", "0.9925"}},
                      {"AUC", {"0.9819", "0.9806", "0.966", "0.991"}},
                      {"BCD", {"0.0052", "0", "0.0057", "0.0005"}},
                      {"BM", {"0.9639", "0.9611", "0.9319", "0.9819"}},
                      {"CEN", {"0.0939", "0.0848", "0.1034", "0.0463"}},
                      {"F1", {"0.9633", "0.9708", "0.9595", "0.9855"}},
                      {"FNR", {"0.0167", "0.0292", "0.0625", "0.0125"}},
                      {"FPR", {"0.0194", "0.0097", "0.0056", "0.0056"}},
                      {"G", {"0.9635", "0.9708", "0.9598", "0.9855"}},
                      {"MCC", {"0.951", "0.9611", "0.9469", "0.9806"}},
                      {"OOC", {"0.9635", "0.9708", "0.9598", "0.9855"}},
                      {"PPV", {"0.944", "0.9708", "0.9825", "0.9834"}},
                      {"RACC", {"0.0651", "0.0625", "0.0596", "0.0628"}},
                      {"TNR", {"0.9806", "0.9903", "0.9944", "0.9944"}},
                      {"TPR", {"0.9833", "0.9708", "0.9375", "0.9875"}}}});

        v.push_back({"sk", "eafp_med_st", sk,
                     {{239, 0, 1, 0}, {1, 238, 0, 1}, {1, 3, 235, 1}, {1, 0, 0, 239}},
                     {{"ACC", {"0.9958", "0.9948", "0.9938", "0.9969"}},
                      {"AGF", {"0.9961", "0.9939", "0.9883", "0.9967"}},
                      {"AGM", {"0.9958", "0.9946", "0.993", "0.9968"}},
                      {"AUC", {"0.9958", "0.9938", "0.9889", "0.9965"}},
                      {"BCD", {"0.001", "0.0005", "0.0021", "0.0005"}},
                      {"BM", {"0.9917", "0.9875", "0.9778", "0.9931"}},
                      {"CEN", {"0.0286", "0.032", "0.0395", "0.0215"}},
                      {"F1", {"0.9917", "0.9896", "0.9874", "0.9938"}},
                      {"FNR", {"0.0042", "0.0083", "0.0208", "0.0042"}},
                      {"FPR", {"0.0042", "0.0042", "0.0014", "0.0028"}},
                      {"G", {"0.9917", "0.9896", "0.9874", "0.9938"}},
                      {"MCC", {"0.9889", "0.9861", "0.9833", "0.9917"}},
                      {"OOC", {"0.9917", "0.9896", "0.9874", "0.9938"}},
                      {"PPV", {"0.9876", "0.9875", "0.9958", "0.9917"}},
                      {"RACC", {"0.063", "0.0628", "0.0615", "0.0628"}},
                      {"TNR", {"0.9958", "0.9958", "0.9986", "0.9972"}},
                      {"TPR", {"0.9958", "0.9917", "0.9792", "0.9958"}}}});

        return v;
    }();
    return data;
}

// Macro rows reproducible from the matrices above; the cxri row of the
// published comparison disagrees with its own matrix and is excluded.
inline const std::vector<MacroRow>& macro_rows() {
    static const std::vector<MacroRow> data = {
        {"cmri", 97.60, 2.40, 0.80, 99.20, 96.81},
        {"sk", 99.06, 0.94, 0.31, 99.69, 98.75},
    };
    return data;
}

inline const Block& find_block(const std::string& dataset, const std::string& method) {
    for (const auto& b : blocks()) {
        if (b.dataset == dataset && b.method == method) return b;
    }
    throw std::runtime_error("no golden block " + dataset + "/" + method);
}

}  // namespace golden
