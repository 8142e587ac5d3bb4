#include "martlab/report.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <ostream>

#include <openssl/evp.h>

namespace martlab {

double frequency_radius(double p, std::uint64_t trials) {
  if (trials == 0) return 0.0;
  return 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
}

bool McReport::passed() const {
  for (const auto& e : entries) {
    if (e.pass && !*e.pass) return false;
  }
  return flags.empty();
}

nlohmann::ordered_json report_to_json(const McReport& r) {
  using json = nlohmann::ordered_json;
  json entries = json::array();
  for (const auto& e : r.entries) {
    json j;
    j["label"] = e.label;
    j["index"] = e.index;
    j["estimate"] = e.estimate;
    j["radius"] = e.radius;
    j["reference"] = e.reference ? json(*e.reference) : json(nullptr);
    j["hits"] = e.hits;
    j["trials"] = e.trials;
    j["pass"] = e.pass ? json(*e.pass) : json(nullptr);
    entries.push_back(std::move(j));
  }
  json out;
  out["statistic"] = r.statistic;
  out["paths"] = r.paths;
  out["master_seed"] = r.master_seed;
  out["config_digest"] = r.config_digest;
  out["entries"] = std::move(entries);
  out["flags"] = r.flags;
  return out;
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return ec == std::errc{} ? std::string(buf.data(), end) : std::string("nan");
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + '"';
}

}  // namespace

void write_reports_csv(std::ostream& os, const std::vector<McReport>& reports) {
  os << "statistic,label,index,estimate,radius,reference,hits,trials,pass,paths,master_seed,config_digest\n";
  for (const auto& r : reports) {
    for (const auto& e : r.entries) {
      os << csv_field(r.statistic) << ',' << csv_field(e.label) << ',' << e.index << ',' << format_double(e.estimate) << ','
         << format_double(e.radius) << ',' << (e.reference ? format_double(*e.reference) : "") << ',' << e.hits << ','
         << e.trials << ',' << (e.pass ? (*e.pass ? "true" : "false") : "") << ',' << r.paths << ','
         << r.master_seed << ',' << r.config_digest << '\n';
    }
  }
}

std::string git_blob_digest(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, header.data(), header.size());
  EVP_DigestUpdate(ctx, content.data(), content.size());
  EVP_DigestFinal_ex(ctx, md.data(), &len);
  EVP_MD_CTX_free(ctx);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xF]);
  }
  return out;
}

}  // namespace martlab
