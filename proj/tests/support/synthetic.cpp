#include "synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace netpois::testkit {
namespace {

IpAddr v4(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d) {
  return IpAddr::from_v4((std::uint32_t(a) << 24) | (std::uint32_t(b) << 16) | (std::uint32_t(c) << 8) | d);
}

IpAddr external(std::size_t i) { return v4(93, 184, static_cast<std::uint8_t>(i / 250), static_cast<std::uint8_t>(1 + i % 250)); }

std::uint64_t lognormal_count(Rng& rng, double mu, double sigma) {
  std::lognormal_distribution<double> d(mu, sigma);
  return static_cast<std::uint64_t>(std::max(1.0, std::round(d(rng))));
}

ConnRecord base(double ts, const IpAddr& src, const IpAddr& dst, Rng& rng) {
  ConnRecord r;
  r.ts = ts;
  r.orig_ip = src;
  r.resp_ip = dst;
  r.orig_p = static_cast<std::uint16_t>(std::uniform_int_distribution<int>(32768, 60999)(rng));
  return r;
}

void fill_web(ConnRecord& r, Rng& rng, bool tls) {
  r.proto = Proto::tcp;
  r.resp_p = tls ? 443 : 80;
  r.service = tls ? "ssl" : "http";
  std::uniform_real_distribution<double> u(0, 1);
  const double s = u(rng);
  r.conn_state = s < 0.85 ? ConnState::SF : (s < 0.93 ? ConnState::S1 : ConnState::RSTO);
  r.orig_pkts = lognormal_count(rng, 2.0, 0.5);
  r.resp_pkts = r.orig_pkts + lognormal_count(rng, 1.5, 0.7);
  r.orig_bytes = r.orig_pkts * std::uniform_int_distribution<int>(60, 400)(rng);
  r.resp_bytes = r.resp_pkts * std::uniform_int_distribution<int>(200, 1400)(rng);
  r.duration = std::exponential_distribution<double>(1.0)(rng);
}

void fill_dns(ConnRecord& r, Rng& rng) {
  r.proto = Proto::udp;
  r.resp_p = 53;
  r.service = "dns";
  r.conn_state = ConnState::SF;
  r.orig_pkts = 1;
  r.resp_pkts = 1;
  r.orig_bytes = std::uniform_int_distribution<int>(30, 70)(rng);
  r.resp_bytes = std::uniform_int_distribution<int>(60, 300)(rng);
  r.duration = std::uniform_real_distribution<double>(0.001, 0.05)(rng);
}

}  // namespace

Cidr internal_cidr() { return *Cidr::parse("10.0.0.0/16"); }

IpAddr ip(const char* s) { return *IpAddr::parse(s); }

std::set<IpAddr> synth_infected(const SynthSpec& spec) {
  std::set<IpAddr> s;
  for (std::size_t i = 0; i < spec.infected_hosts; ++i) s.insert(v4(10, 0, 1, static_cast<std::uint8_t>(10 + i)));
  return s;
}

Dataset synth_traffic(const SynthSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  Dataset ds;
  ds.scenario_name = "synthetic";
  ds.internal_subnets = {internal_cidr()};
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<std::size_t> ext(0, spec.external_pool - 1);
  const double end = spec.start_ts + spec.duration_s;

  auto browse = [&](const IpAddr& host, double rate) {
    for (double t = spec.start_ts + std::exponential_distribution<double>(rate)(rng); t < end;
         t += std::exponential_distribution<double>(rate)(rng)) {
      auto r = base(t, host, external(ext(rng) % 40), rng);
      const double k = u(rng);
      if (k < 0.45) fill_web(r, rng, false);
      else if (k < 0.8) fill_web(r, rng, true);
      else {
        r.resp_ip = v4(10, 0, 0, 2);  // internal resolver
        fill_dns(r, rng);
      }
      ds.records.push_back(r);
    }
  };

  for (std::size_t h = 0; h < spec.benign_hosts; ++h) browse(v4(10, 0, 0, static_cast<std::uint8_t>(20 + h)), spec.benign_rate);

  const IpAddr controller = v4(203, 0, 113, 7);
  for (const auto& bot : synth_infected(spec)) {
    browse(bot, spec.benign_rate);
    for (double t = spec.start_ts + std::exponential_distribution<double>(spec.bot_rate)(rng); t < end;
         t += std::exponential_distribution<double>(spec.bot_rate)(rng)) {
      const double k = u(rng);
      if (k < 0.25) {
        auto r = base(t, bot, controller, rng);
        r.proto = Proto::tcp;
        r.resp_p = 6667;
        r.service = "irc";
        r.conn_state = ConnState::SF;
        r.orig_pkts = lognormal_count(rng, 1.5, 0.3);
        r.resp_pkts = lognormal_count(rng, 1.5, 0.3);
        r.orig_bytes = r.orig_pkts * 80;
        r.resp_bytes = r.resp_pkts * 120;
        r.duration = std::exponential_distribution<double>(0.2)(rng);
        ds.records.push_back(r);
      } else {
        // Spam burst: several SMTP attempts to distinct mail servers.
        const int burst = std::uniform_int_distribution<int>(2, 6)(rng);
        for (int b = 0; b < burst; ++b) {
          auto r = base(t + 0.3 * b, bot, external(40 + ext(rng) % (spec.external_pool - 40)), rng);
          r.proto = Proto::tcp;
          r.resp_p = 25;
          const double s = u(rng);
          if (s < 0.5) {
            r.conn_state = ConnState::S0;
            r.orig_pkts = std::uniform_int_distribution<int>(1, 3)(rng);
            r.resp_pkts = 0;
            r.orig_bytes = 0;
            r.resp_bytes = 0;
            r.duration = std::uniform_real_distribution<double>(1, 9)(rng);
          } else if (s < 0.7) {
            r.conn_state = ConnState::REJ;
            r.orig_pkts = 1;
            r.resp_pkts = 1;
            r.orig_bytes = 0;
            r.resp_bytes = 0;
          } else {
            r.conn_state = ConnState::SF;
            r.service = "smtp";
            r.orig_pkts = lognormal_count(rng, 2.5, 0.4);
            r.resp_pkts = lognormal_count(rng, 2.2, 0.4);
            r.orig_bytes = r.orig_pkts * std::uniform_int_distribution<int>(300, 900)(rng);
            r.resp_bytes = r.resp_pkts * std::uniform_int_distribution<int>(40, 120)(rng);
            r.duration = std::exponential_distribution<double>(0.3)(rng);
          }
          ds.records.push_back(r);
        }
      }
    }
  }
  sort_by_time(ds.records);
  return apply_labels(std::move(ds), {synth_infected(spec)});
}

Dataset random_dataset(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset ds;
  ds.scenario_name = "random";
  ds.internal_subnets = {internal_cidr()};
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<int> host(1, 5), extn(1, 8), coin(0, 1);
  const std::uint16_t ports[] = {22, 25, 53, 80, 443, 8080};
  const char* services[] = {"http", "ssl", "dns", "smtp"};
  for (std::size_t i = 0; i < n; ++i) {
    ConnRecord r;
    r.ts = 1000.0 + u(rng) * 150.0;
    const IpAddr in = v4(10, 0, 0, static_cast<std::uint8_t>(host(rng)));
    const IpAddr out = v4(198, 51, 100, static_cast<std::uint8_t>(extn(rng)));
    const double dir = u(rng);
    if (dir < 0.6) {
      r.orig_ip = in;
      r.resp_ip = out;
    } else if (dir < 0.8) {
      r.orig_ip = out;
      r.resp_ip = in;
    } else if (dir < 0.9) {
      r.orig_ip = in;
      r.resp_ip = v4(10, 0, 0, static_cast<std::uint8_t>(host(rng)));
    } else {
      r.orig_ip = out;
      r.resp_ip = v4(198, 51, 100, static_cast<std::uint8_t>(extn(rng)));
    }
    r.proto = static_cast<Proto>(std::uniform_int_distribution<int>(0, 2)(rng));
    r.orig_p = static_cast<std::uint16_t>(std::uniform_int_distribution<int>(1024, 65535)(rng));
    r.resp_p = r.proto == Proto::icmp ? 0 : ports[std::uniform_int_distribution<int>(0, 5)(rng)];
    if (coin(rng)) r.service = services[std::uniform_int_distribution<int>(0, 3)(rng)];
    if (coin(rng)) r.duration = std::round(u(rng) * 1000.0) / 100.0;
    if (coin(rng)) r.orig_bytes = std::uniform_int_distribution<int>(0, 5000)(rng);
    if (coin(rng)) r.resp_bytes = std::uniform_int_distribution<int>(0, 5000)(rng);
    r.orig_pkts = std::uniform_int_distribution<int>(0, 30)(rng);
    r.resp_pkts = std::uniform_int_distribution<int>(0, 30)(rng);
    r.conn_state = static_cast<ConnState>(std::uniform_int_distribution<int>(0, 12)(rng));
    ds.records.push_back(r);
  }
  sort_by_time(ds.records);
  return apply_labels(std::move(ds), {{v4(10, 0, 0, 1), v4(198, 51, 100, 8)}});
}

}  // namespace netpois::testkit
