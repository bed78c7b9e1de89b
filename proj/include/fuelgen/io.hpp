#pragma once

// File formats: disk CSV, PGM rasters, ESRI-style covariate grids, SVG
// renders, and the calibration outputs (metrics, chain, covariance, summary).

#include <zlib.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "calibrator.hpp"
#include "domain.hpp"
#include "errors.hpp"
#include "gp_intensity.hpp"
#include "metrics.hpp"
#include "model.hpp"

namespace fuelgen {

namespace detail {

inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s = buf;
  if (s == "-0" || s.find_first_not_of("-0.") == std::string::npos) s.erase(0, s[0] == '-' ? 1 : 0);
  return s;
}

/// Shortest text that reads back to the same double.
inline std::string format_g(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double parse_double(const std::string& s, std::size_t line, std::string_view what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || !std::isfinite(v))
    throw ParseError("invalid " + std::string(what) + " '" + s + "'", line);
  return v;
}

template <class Fn>
auto with_input(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return fn(in);
}

template <class Fn>
void with_output(const std::filesystem::path& path, Fn&& fn) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  fn(out);
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Disk CSV: header `x,y,r`, six decimals.

inline void write_disks_csv(std::ostream& out, const DiskSet& set) {
  out << "x,y,r\n";
  for (const Disk& d : set.disks)
    out << detail::format_fixed(d.center.x, 6) << ',' << detail::format_fixed(d.center.y, 6) << ','
        << detail::format_fixed(d.radius, 6) << '\n';
}

inline DiskSet read_disks_csv(std::istream& in, const Domain& domain) {
  DiskSet set;
  set.domain = domain;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (!header) {
      if (t != "x,y,r") throw ParseError("expected header 'x,y,r'", line_no);
      header = true;
      continue;
    }
    const auto f = detail::split(t, ',');
    if (f.size() != 3) throw ParseError("expected 3 fields, got " + std::to_string(f.size()), line_no);
    const Disk d{{detail::parse_double(f[0], line_no, "x"), detail::parse_double(f[1], line_no, "y")},
                 detail::parse_double(f[2], line_no, "radius")};
    if (!(d.radius > 0.0)) throw ParseError("radius must be positive", line_no);
    set.disks.push_back(d);
  }
  if (!header) throw ParseError("missing header 'x,y,r'", line_no);
  return set;
}

inline void save_disks(const std::filesystem::path& path, const DiskSet& set) {
  detail::with_output(path, [&](std::ostream& out) { write_disks_csv(out, set); });
}

inline DiskSet load_disks(const std::filesystem::path& path, const Domain& domain) {
  return detail::with_input(path, [&](std::istream& in) { return read_disks_csv(in, domain); });
}

// ---------------------------------------------------------------------------
// PGM (P2). Value 1 marks an occupied pixel; the first image row is the
// northern edge. A comment records the extent and pixel size:
//   # fuelgen domain <x_min> <y_min> <x_max> <y_max> pixel <size>

inline void write_pgm(std::ostream& out, const BinaryRaster& r) {
  const Domain& d = r.domain;
  out << "P2\n# fuelgen domain " << detail::format_g(d.x_min) << ' ' << detail::format_g(d.y_min) << ' '
      << detail::format_g(d.x_max) << ' ' << detail::format_g(d.y_max) << " pixel " << detail::format_g(r.pixel_size)
      << '\n'
      << r.nx << ' ' << r.ny << "\n1\n";
  std::string row;
  for (int iy = r.ny - 1; iy >= 0; --iy) {
    row.clear();
    for (int ix = 0; ix < r.nx; ++ix) {
      if (ix) row += ' ';
      row += r.at(ix, iy) ? '1' : '0';
    }
    out << row << '\n';
  }
}

/// Reads a P2 raster. Without the extent comment the raster is placed at the
/// origin with 0.05 m pixels. Pixels above half the maximum are occupied.
inline BinaryRaster read_pgm(std::istream& in) {
  std::vector<std::string> tokens;
  std::optional<std::array<double, 5>> geometry;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      std::istringstream c(line.substr(hash + 1));
      std::string tag, word;
      std::array<double, 5> g{};
      if (c >> tag >> word && tag == "fuelgen" && word == "domain" && c >> g[0] >> g[1] >> g[2] >> g[3] >> word &&
          word == "pixel" && c >> g[4])
        geometry = g;
      line.erase(hash);
    }
    std::istringstream s(line);
    std::string tok;
    while (s >> tok) tokens.push_back(tok);
  }
  if (tokens.size() < 4 || tokens[0] != "P2") throw ParseError("not an ASCII PGM (P2) file", 1);
  auto to_int = [&](const std::string& t) {
    std::size_t used = 0;
    long v = -1;
    try {
      v = std::stol(t, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != t.size() || v < 0) throw ParseError("invalid PGM token '" + t + "'", line_no);
    return v;
  };
  const long nx = to_int(tokens[1]), ny = to_int(tokens[2]), maxval = to_int(tokens[3]);
  if (nx < 1 || ny < 1 || maxval < 1) throw ParseError("PGM dimensions must be positive", line_no);
  if (tokens.size() != 4 + static_cast<std::size_t>(nx * ny))
    throw ParseError("PGM has " + std::to_string(tokens.size() - 4) + " pixels, expected " + std::to_string(nx * ny),
                     line_no);
  BinaryRaster r;
  r.nx = static_cast<int>(nx);
  r.ny = static_cast<int>(ny);
  if (geometry) {
    const auto& g = *geometry;
    r.domain = Domain{g[0], g[1], g[2], g[3]};
    r.pixel_size = g[4];
  } else {
    r.pixel_size = 0.05;
    r.domain = Domain{0.0, 0.0, nx * r.pixel_size, ny * r.pixel_size};
  }
  r.bits.assign(static_cast<std::size_t>(nx * ny), 0);
  for (long row = 0; row < ny; ++row)
    for (long ix = 0; ix < nx; ++ix) {
      const long v = to_int(tokens[4 + static_cast<std::size_t>(row * nx + ix)]);
      r.set(static_cast<int>(ix), static_cast<int>(ny - 1 - row), 2 * v > maxval);
    }
  return r;
}

inline void save_pgm(const std::filesystem::path& path, const BinaryRaster& r) {
  detail::with_output(path, [&](std::ostream& out) { write_pgm(out, r); });
}

inline BinaryRaster load_pgm(const std::filesystem::path& path) {
  return detail::with_input(path, [&](std::istream& in) { return read_pgm(in); });
}

// ---------------------------------------------------------------------------
// Covariate grids. Header lines `key value` (case-insensitive):
//   ncols, nrows, xmin, ymin, xmax, ymax   required
//   scale, offset                          optional, value = scale * raw + offset
// followed by nrows rows of ncols values, northern row first.

inline CovariateField read_covariate_grid(std::istream& in, std::string name = {}) {
  std::map<std::string, double> header;
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  static const std::array<std::string_view, 8> kKeys = {"ncols", "nrows", "xmin", "ymin",
                                                        "xmax",  "ymax",  "scale", "offset"};
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream s(t);
    std::string first;
    s >> first;
    std::string key = first;
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
    if (values.empty() && std::find(kKeys.begin(), kKeys.end(), key) != kKeys.end()) {
      std::string v, extra;
      if (!(s >> v) || (s >> extra)) throw ParseError("header line needs exactly one value", line_no);
      header[key] = detail::parse_double(v, line_no, key);
      continue;
    }
    std::istringstream row(t);
    std::string tok;
    while (row >> tok) values.push_back(detail::parse_double(tok, line_no, "covariate value"));
  }
  for (const char* k : {"ncols", "nrows", "xmin", "ymin", "xmax", "ymax"})
    if (!header.count(k)) throw ParseError(std::string("covariate grid header lacks '") + k + "'", line_no);
  const double scale = header.count("scale") ? header["scale"] : 1.0;
  const double offset = header.count("offset") ? header["offset"] : 0.0;
  for (double& v : values) v = scale * v + offset;
  const int ncols = static_cast<int>(header["ncols"]), nrows = static_cast<int>(header["nrows"]);
  if (ncols != header["ncols"] || nrows != header["nrows"]) throw ParseError("ncols and nrows must be integers", line_no);
  return CovariateField(Domain{header["xmin"], header["ymin"], header["xmax"], header["ymax"]}, ncols, nrows,
                        std::move(values), std::move(name));
}

inline CovariateField load_covariate_grid(const std::filesystem::path& path) {
  return detail::with_input(path, [&](std::istream& in) { return read_covariate_grid(in, path.stem().string()); });
}

// ---------------------------------------------------------------------------
// PNG (8-bit RGB, zlib-compressed) and base64 for SVG-embedded images

namespace detail {

inline void png_chunk(std::string& out, const char* type, const std::string& data) {
  auto be32 = [&](std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<char>((v >> s) & 0xff));
  };
  be32(static_cast<std::uint32_t>(data.size()));
  const std::string body = std::string(type, 4) + data;
  out += body;
  be32(static_cast<std::uint32_t>(crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()))));
}

}  // namespace detail

/// rgb holds height rows of width * 3 bytes, top row first.
inline std::string encode_png(int width, int height, const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3) throw InputError("PNG pixel buffer has wrong size");
  std::string raw;
  raw.reserve(rgb.size() + static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) {
    raw.push_back('\0');  // filter: none
    raw.append(reinterpret_cast<const char*>(rgb.data()) + static_cast<std::size_t>(y) * width * 3,
               static_cast<std::size_t>(width) * 3);
  }
  uLongf len = compressBound(static_cast<uLong>(raw.size()));
  std::string packed(len, '\0');
  if (compress2(reinterpret_cast<Bytef*>(packed.data()), &len, reinterpret_cast<const Bytef*>(raw.data()),
                static_cast<uLong>(raw.size()), 9) != Z_OK)
    throw IoError("PNG compression failed");
  packed.resize(len);
  std::string ihdr;
  for (std::uint32_t v : {static_cast<std::uint32_t>(width), static_cast<std::uint32_t>(height)})
    for (int s = 24; s >= 0; s -= 8) ihdr.push_back(static_cast<char>((v >> s) & 0xff));
  ihdr += std::string("\x08\x02\x00\x00\x00", 5);  // 8-bit depth, RGB
  std::string png = "\x89PNG\r\n\x1a\n";
  detail::png_chunk(png, "IHDR", ihdr);
  detail::png_chunk(png, "IDAT", packed);
  detail::png_chunk(png, "IEND", {});
  return png;
}

inline std::string base64(std::string_view bytes) {
  static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (static_cast<std::uint8_t>(bytes[i]) << 16) | (static_cast<std::uint8_t>(bytes[i + 1]) << 8) |
                            static_cast<std::uint8_t>(bytes[i + 2]);
    for (int s = 18; s >= 0; s -= 6) out.push_back(kAlphabet[(v >> s) & 63]);
  }
  if (i < bytes.size()) {
    std::uint32_t v = static_cast<std::uint8_t>(bytes[i]) << 16;
    if (i + 1 < bytes.size()) v |= static_cast<std::uint8_t>(bytes[i + 1]) << 8;
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(i + 1 < bytes.size() ? kAlphabet[(v >> 6) & 63] : '=');
    out.push_back('=');
  }
  return out;
}

// ---------------------------------------------------------------------------
// SVG

struct SvgOptions {
  double scale = 40.0;  ///< pixels per meter
  std::string fill = "#2e7d32";
  double fill_opacity = 0.85;
  int underlay_pixels = 150;  ///< covariate image resolution along the longer side
};

/// Heat colour for a covariate value in [-1, 1]: blue through white to brown.
inline std::array<std::uint8_t, 3> covariate_colour(double v) {
  const double t = std::clamp(0.5 * (v + 1.0), 0.0, 1.0);
  const std::array<double, 3> lo{49, 104, 172}, mid{247, 247, 247}, hi{166, 97, 26};
  std::array<std::uint8_t, 3> c{};
  for (int k = 0; k < 3; ++k) {
    const double x = t < 0.5 ? lo[k] + (mid[k] - lo[k]) * (t / 0.5) : mid[k] + (hi[k] - mid[k]) * ((t - 0.5) / 0.5);
    c[k] = static_cast<std::uint8_t>(std::lround(x));
  }
  return c;
}

/// Domain frame, disks clipped to the domain, and an optional covariate
/// underlay (the weighted covariate term, rescaled into [-1, 1]).
inline void write_svg(std::ostream& out, const DiskSet& set, const CovariateStack* underlay = nullptr,
                      const SvgOptions& opt = {}) {
  const Domain& d = set.domain;
  const double w = d.width() * opt.scale, h = d.height() * opt.scale;
  auto fx = [&](double x) { return detail::format_fixed((x - d.x_min) * opt.scale, 3); };
  auto fy = [&](double y) { return detail::format_fixed((d.y_max - y) * opt.scale, 3); };
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" xmlns:xlink=\"http://www.w3.org/1999/xlink\" width=\""
      << detail::format_fixed(w, 3) << "\" height=\"" << detail::format_fixed(h, 3) << "\" viewBox=\"0 0 "
      << detail::format_fixed(w, 3) << ' ' << detail::format_fixed(h, 3) << "\">\n"
      << "<defs><clipPath id=\"domain\"><rect x=\"0\" y=\"0\" width=\"" << detail::format_fixed(w, 3) << "\" height=\""
      << detail::format_fixed(h, 3) << "\"/></clipPath></defs>\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << detail::format_fixed(w, 3) << "\" height=\"" << detail::format_fixed(h, 3)
      << "\" fill=\"#ffffff\"/>\n";
  if (underlay && !underlay->fields.empty()) {
    const double longer = std::max(d.width(), d.height());
    const int px = std::max(1, static_cast<int>(std::lround(opt.underlay_pixels * d.width() / longer)));
    const int py = std::max(1, static_cast<int>(std::lround(opt.underlay_pixels * d.height() / longer)));
    double total_beta = 0.0;
    for (std::size_t k = 1; k < underlay->beta.size(); ++k) total_beta += underlay->beta[k];
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(px) * py * 3);
    for (int row = 0; row < py; ++row)
      for (int col = 0; col < px; ++col) {
        const Point p{d.x_min + (col + 0.5) * d.width() / px, d.y_max - (row + 0.5) * d.height() / py};
        const double v = total_beta > 0.0 ? underlay->covariate_term(p) / total_beta : 0.0;
        const auto c = covariate_colour(v);
        std::copy(c.begin(), c.end(), rgb.begin() + (static_cast<std::size_t>(row) * px + col) * 3);
      }
    out << "<image x=\"0\" y=\"0\" width=\"" << detail::format_fixed(w, 3) << "\" height=\""
        << detail::format_fixed(h, 3)
        << "\" preserveAspectRatio=\"none\" style=\"image-rendering:pixelated\" xlink:href=\"data:image/png;base64,"
        << base64(encode_png(px, py, rgb)) << "\"/>\n";
  }
  out << "<g clip-path=\"url(#domain)\" fill=\"" << opt.fill << "\" fill-opacity=\""
      << detail::format_fixed(opt.fill_opacity, 2) << "\">\n";
  for (const Disk& disk : set.disks)
    out << "<circle cx=\"" << fx(disk.center.x) << "\" cy=\"" << fy(disk.center.y) << "\" r=\""
        << detail::format_fixed(disk.radius * opt.scale, 3) << "\"/>\n";
  out << "</g>\n<rect x=\"0\" y=\"0\" width=\"" << detail::format_fixed(w, 3) << "\" height=\""
      << detail::format_fixed(h, 3) << "\" fill=\"none\" stroke=\"#000000\" stroke-width=\"1\"/>\n</svg>\n";
}

inline void save_svg(const std::filesystem::path& path, const DiskSet& set, const CovariateStack* underlay = nullptr,
                     const SvgOptions& opt = {}) {
  detail::with_output(path, [&](std::ostream& out) { write_svg(out, set, underlay, opt); });
}

// ---------------------------------------------------------------------------
// Metrics CSV: the 13 metric names then `flags` (bitmask of undefined entries).

inline void write_metrics_header(std::ostream& out) {
  for (std::string_view name : kMetricNames) out << name << ',';
  out << "flags\n";
}

inline void write_metrics_row(std::ostream& out, const MetricsVector& v) {
  for (double x : v.values) out << detail::format_g(x) << ',';
  out << v.flags << '\n';
}

inline std::vector<MetricsVector> read_metrics_csv(std::istream& in) {
  std::vector<MetricsVector> rows;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto f = detail::split(t, ',');
    if (!header) {
      if (f.size() != kMetricCount + 1 || f.back() != "flags") throw ParseError("unexpected metrics header", line_no);
      for (std::size_t k = 0; k < kMetricCount; ++k)
        if (f[k] != kMetricNames[k]) throw ParseError("unexpected metric column '" + f[k] + "'", line_no);
      header = true;
      continue;
    }
    if (f.size() != kMetricCount + 1) throw ParseError("expected 14 fields", line_no);
    MetricsVector v;
    for (std::size_t k = 0; k < kMetricCount; ++k) v.values[k] = detail::parse_double(f[k], line_no, kMetricNames[k]);
    const double flags = detail::parse_double(f.back(), line_no, "flags");
    if (flags < 0 || flags != std::floor(flags) || flags > kAllMetrics) throw ParseError("invalid flags", line_no);
    v.flags = static_cast<std::uint32_t>(flags);
    rows.push_back(v);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Calibration outputs

inline void write_chain_csv(std::ostream& out, const PosteriorSamples& s) {
  out << "iter,rho,lambda,mu,sigma,loglik,accepted\n";
  for (const ChainRecord& r : s.records)
    out << r.iter << ',' << detail::format_g(r.theta.rho) << ',' << detail::format_g(r.theta.lambda) << ','
        << detail::format_g(r.theta.mu) << ',' << detail::format_g(r.theta.sigma) << ',' << detail::format_g(r.loglik)
        << ',' << (r.accepted ? 1 : 0) << '\n';
}

/// `#` provenance lines, then a header row and one row per metric.
inline void write_covariance_csv(std::ostream& out, const MetricsCovariance& c) {
  const CovarianceProvenance& p = c.provenance;
  out << "# fuelgen metrics covariance\n"
      << "# observed=" << p.observed << " augmented_samples=" << p.augmented_samples << " per_sample=" << p.per_sample
      << " vectors=" << p.vectors << " failed_generations=" << p.failed_generations << '\n'
      << "# rho_s=" << detail::format_g(p.rho_s_lo) << ',' << detail::format_g(p.rho_s_hi)
      << " shrinkage=" << detail::format_g(p.shrinkage) << " seed=" << p.seed << '\n'
      << "# floored=";
  for (std::size_t i = 0; i < p.floored.size(); ++i) out << (i ? ";" : "") << kMetricNames[p.floored[i]];
  out << "\nmetric";
  for (std::string_view name : kMetricNames) out << ',' << name;
  out << '\n';
  for (Eigen::Index i = 0; i < c.matrix.rows(); ++i) {
    out << kMetricNames[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < c.matrix.cols(); ++j) out << ',' << detail::format_g(c.matrix(i, j));
    out << '\n';
  }
}

inline void write_summary_csv(std::ostream& out, const PosteriorSummary& s, const PriorSpec& priors) {
  out << "param,mode,mean,lo95,hi95,width,prior_lo95,prior_hi95,prior_width\n";
  for (std::size_t c = 0; c < kParamCount; ++c) {
    const ParamSummary& p = s.params[c];
    const auto [plo, phi] = prior_interval(priors, static_cast<Param>(c));
    out << kParamNames[c] << ',' << detail::format_g(p.mode) << ',' << detail::format_g(p.mean) << ','
        << detail::format_g(p.lo) << ',' << detail::format_g(p.hi) << ',' << detail::format_g(p.width()) << ','
        << detail::format_g(plo) << ',' << detail::format_g(phi) << ',' << detail::format_g(phi - plo) << '\n';
  }
}

inline void write_summary_text(std::ostream& out, const CalibrationResult& r) {
  char buf[256];
  out << "fuelgen calibration summary\n";
  out << "observations: " << r.observed.size() << "\n";
  std::snprintf(buf, sizeof buf, "empirical estimates: lambda=%.4f mu=%.4f sigma=%.4f\n", r.theta_hat.lambda_hat,
                r.theta_hat.mu_hat, r.theta_hat.sigma_hat);
  out << buf;
  out << "chain: " << r.samples.records.size() << " iterations, warm-up " << r.samples.warmup << "\n";
  std::snprintf(buf, sizeof buf, "acceptance rate: %.3f\n", r.samples.acceptance_rate());
  out << buf;
  out << "generation failures: " << r.samples.generation_failures << ", proposals outside prior: "
      << r.samples.prior_rejections << "\n";
  out << "covariance: " << r.covariance.provenance.vectors << " vectors, shrinkage "
      << detail::format_g(r.covariance.provenance.shrinkage) << ", floored components "
      << r.covariance.provenance.floored.size() << "\n\n";
  if (!r.summary) {
    out << "posterior summaries skipped: fewer than 100 draws after burn-in\n";
    return;
  }
  const PosteriorSummary& s = *r.summary;
  out << "burn-in " << s.burn_in << ", kept " << s.draws << "\n";
  std::snprintf(buf, sizeof buf, "%-8s %12s %12s %12s %12s %14s\n", "param", "mode", "mean", "lo95", "hi95",
                "prior width");
  out << buf;
  for (std::size_t c = 0; c < kParamCount; ++c) {
    const ParamSummary& p = s.params[c];
    const auto [plo, phi] = prior_interval(r.priors, static_cast<Param>(c));
    std::snprintf(buf, sizeof buf, "%-8s %12.5g %12.5g %12.5g %12.5g %14.5g\n", std::string(kParamNames[c]).c_str(),
                  p.mode, p.mean, p.lo, p.hi, phi - plo);
    out << buf;
  }
}

}  // namespace fuelgen
