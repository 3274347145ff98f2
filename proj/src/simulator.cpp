#include "phonon_herald/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <fstream>
#include <mutex>
#include <thread>

#include "phonon_herald/constants.hpp"

namespace herald {

void CampaignConfig::validate() const {
  params.validate();
  schedule.validate();
  cascade.validate();
  auto in_unit = [](double v, const char* name) {
    if (v < 0.0 || v > 1.0) {
      throw std::invalid_argument(std::string("CampaignConfig: ") + name +
                                  " must be in [0,1]");
    }
  };
  in_unit(eta_w, "eta_w");
  in_unit(eta_r, "eta_r");
  if (mu_w < 0.0) throw std::invalid_argument("CampaignConfig: mu_w must be >= 0");
  if (n_residual < 0.0 || thermal_admix < 0.0 || dark_rate_hz < 0.0 ||
      storage_delay_us < 0.0) {
    throw std::invalid_argument("CampaignConfig: noise parameters must be >= 0");
  }
  if (temporal_modes < 1) {
    throw std::invalid_argument("CampaignConfig: temporal_modes must be >= 1");
  }
  if (n_shots < 1) throw std::invalid_argument("CampaignConfig: n_shots must be >= 1");
  if (!(dt_us > 0.0)) throw std::invalid_argument("CampaignConfig: dt must be positive");
  if (!(duty_cycle > 0.0) || duty_cycle > 1.0) {
    throw std::invalid_argument("CampaignConfig: duty_cycle must be in (0,1]");
  }
  if (scale.coeff_w < 0.0 || scale.coeff_r < 0.0) {
    throw std::invalid_argument("CampaignConfig: power scale must be >= 0");
  }
  auto window_ok = [&](const Interval& w) {
    return w.start_us >= 0.0 && w.start_us < w.end_us &&
           w.end_us <= schedule.shot_length_us;
  };
  if (write_window_us && !window_ok(*write_window_us)) {
    throw std::invalid_argument("CampaignConfig: write window outside the shot");
  }
  if (read_window_us && !window_ok(*read_window_us)) {
    throw std::invalid_argument("CampaignConfig: read window outside the shot");
  }
  const bool have_write = write_window_us || schedule.write_stage();
  const bool have_read = read_window_us || schedule.read_stage();
  if ((mu_w > 0.0 || n_residual > 0.0 || thermal_admix > 0.0 ||
       storage_delay_us > 0.0) &&
      (!have_write || !have_read)) {
    throw std::invalid_argument(
        "CampaignConfig: pair process requires write and read windows "
        "(from the schedule stages or explicit overrides)");
  }
}

namespace {

Interval stage_interval(const PulseStage* st) {
  return {st->start_us, st->end_us};
}

}  // namespace

ShotGenerator::ShotGenerator(const CampaignConfig& config) : config_(config) {
  config_.validate();

  occupation_ = evolve_occupation(config_.params, config_.schedule, config_.scale,
                                  {config_.dt_us, std::nullopt});
  RateTraces raw = photon_rate_traces(occupation_, config_.params, config_.schedule,
                                      config_.scale);

  if (config_.write_window_us) {
    write_window_ = *config_.write_window_us;
  } else if (const PulseStage* w = config_.schedule.write_stage()) {
    write_window_ = stage_interval(w);
  }
  if (config_.read_window_us) {
    read_window_ = *config_.read_window_us;
  } else if (const PulseStage* r = config_.schedule.read_stage()) {
    read_window_ = stage_interval(r);
  }

  if (config_.readout_rate_hz) {
    readout_rate_ = *config_.readout_rate_hz;
  } else if (const PulseStage* r = config_.schedule.read_stage()) {
    readout_rate_ = optically_broadened_rate(config_.params,
                                             config_.scale.coeff_r * r->read_power);
  }

  const double gamma_th = config_.params.gamma_th();
  const double delay_s = units::us(config_.storage_delay_us);
  p_surv_ = std::exp(-config_.params.gamma_m * (config_.params.n_th + 1.0) * delay_s);
  additions_mean_ = gamma_th * delay_s + config_.n_residual + config_.thermal_admix;

  // Background = deterministic sideband rates minus the mean rate of the
  // correlated overlay (pair photons in the write window, surviving
  // phonons plus thermal additions in the read window), floored at zero so
  // nothing is double-counted. Campaign-mean rates still match the
  // deterministic model wherever the overlay is drive-consistent.
  std::vector<double> bg_s = raw.gamma_s;
  std::vector<double> bg_as = raw.gamma_as;
  if (config_.mu_w > 0.0 && write_window_.length_us() > 0.0) {
    const double pair_rate = config_.mu_w / units::us(write_window_.length_us());
    for (std::size_t i = 0; i < raw.times_us.size(); ++i) {
      if (write_window_.contains(raw.times_us[i])) {
        bg_s[i] = std::max(0.0, bg_s[i] - pair_rate);
      }
    }
  }
  const double overlay_read_mean = config_.mu_w * p_surv_ + additions_mean_;
  if (overlay_read_mean > 0.0 && read_window_.length_us() > 0.0) {
    const double span_s = units::us(read_window_.length_us());
    const double x = readout_rate_ * span_s;
    for (std::size_t i = 0; i < raw.times_us.size(); ++i) {
      if (!read_window_.contains(raw.times_us[i])) continue;
      const double dt_in = units::us(raw.times_us[i] - read_window_.start_us);
      // Truncated exponential density of the readout envelope (uniform in
      // the weak-readout limit).
      const double density =
          x < 1e-9 ? 1.0 / span_s
                   : readout_rate_ * std::exp(-readout_rate_ * dt_in) / (1.0 - std::exp(-x));
      bg_as[i] = std::max(0.0, bg_as[i] - overlay_read_mean * density);
    }
  }

  RateTraces bg;
  bg.times_us = raw.times_us;
  bg.dt_us = raw.dt_us;
  bg.gamma_s = std::move(bg_s);
  bg.gamma_as = std::move(bg_as);
  background_ = convolve_rate_traces(config_.cascade, bg);

  lambda_.resize(background_.times_us.size());
  lambda_max_ = 0.0;
  for (std::size_t i = 0; i < lambda_.size(); ++i) {
    lambda_[i] = config_.eta_w * background_.gamma_s[i] +
                 config_.eta_r * background_.gamma_as[i] + config_.dark_rate_hz;
    lambda_max_ = std::max(lambda_max_, lambda_[i]);
  }
}

ShotRecord ShotGenerator::simulate_shot(long shot_index) const {
  RngStream physics = RngStream::derive(config_.master_seed,
                                        static_cast<std::uint64_t>(shot_index), 0);
  RngStream detection = RngStream::derive(config_.master_seed,
                                          static_cast<std::uint64_t>(shot_index), 1);

  // Physical realization: pairs, storage survival, thermal additions.
  // Drawn before anything detection-dependent so that efficiency changes
  // do not alter the underlying process.
  const int modes = config_.temporal_modes;
  std::int64_t pairs = 0;
  std::int64_t read_source = 0;
  for (int i = 0; i < modes; ++i) {
    const std::int64_t m = physics.bose_einstein(config_.mu_w / modes);
    const std::int64_t survived = physics.binomial(m, p_surv_);
    const std::int64_t added = physics.bose_einstein(additions_mean_ / modes);
    pairs += m;
    read_source += survived + added;
  }

  ShotRecord record;
  record.shot_index = shot_index;
  auto push = [&](double t_us) {
    const double q = std::round(t_us / kTimestampQuantumUs) * kTimestampQuantumUs;
    if (q >= 0.0 && q < config_.schedule.shot_length_us) {
      record.timestamps_us.push_back(q);
    }
  };

  const std::int64_t write_dets = detection.binomial(pairs, config_.eta_w);
  for (std::int64_t i = 0; i < write_dets; ++i) {
    const double t = detection.uniform(write_window_.start_us, write_window_.end_us);
    push(t + units::s_to_us(sample_delay(config_.cascade, detection)));
  }

  const std::int64_t read_dets = detection.binomial(read_source, config_.eta_r);
  const double read_span_s = units::us(read_window_.length_us());
  for (std::int64_t i = 0; i < read_dets; ++i) {
    const double within =
        read_span_s > 0.0
            ? detection.truncated_exponential(readout_rate_, read_span_s)
            : 0.0;
    push(read_window_.start_us + units::s_to_us(within) +
         units::s_to_us(sample_delay(config_.cascade, detection)));
  }

  // Inhomogeneous Poisson background by thinning against the flat majorant.
  if (lambda_max_ > 0.0) {
    const double length_us = config_.schedule.shot_length_us;
    double t_us = 0.0;
    while (true) {
      t_us += units::s_to_us(detection.exponential(lambda_max_));
      if (t_us >= length_us) break;
      const auto idx = static_cast<std::size_t>(t_us / config_.dt_us);
      const double rate = lambda_[std::min(idx, lambda_.size() - 1)];
      if (detection.uniform() * lambda_max_ < rate) push(t_us);
    }
  }

  std::sort(record.timestamps_us.begin(), record.timestamps_us.end());
  return record;
}

double expected_pair_coincidence_probability(const CampaignConfig& config) {
  config.validate();
  const int modes = config.temporal_modes;
  const double mu = config.mu_w / modes;
  const double gamma_th = config.params.gamma_th();
  const double delay_s = units::us(config.storage_delay_us);
  const double p_surv =
      std::exp(-config.params.gamma_m * (config.params.n_th + 1.0) * delay_s);
  const double nu = (gamma_th * delay_s + config.n_residual + config.thermal_admix) / modes;

  // E[x^m] over a Bose-Einstein mode with mean mu: (1)/(1 + mu (1-x)).
  auto bose_pgf = [](double mean, double x) { return 1.0 / (1.0 + mean * (1.0 - x)); };
  // Per mode: no write detection <=> thinning by eta_w fails for every pair;
  // no read detection <=> thinned survivors and additions all missed.
  const double qw = 1.0 - config.eta_w;
  const double qr = 1.0 - config.eta_r;
  const double none_w = bose_pgf(mu, qw);
  const double none_r = bose_pgf(mu, 1.0 - p_surv * config.eta_r) * bose_pgf(nu, qr);
  const double none_both =
      bose_pgf(mu, qw * (1.0 - p_surv * config.eta_r)) * bose_pgf(nu, qr);
  double p_w0 = 1.0, p_r0 = 1.0, p_wr0 = 1.0;
  for (int i = 0; i < modes; ++i) {
    p_w0 *= none_w;
    p_r0 *= none_r;
    p_wr0 *= none_both;
  }
  return 1.0 - p_w0 - p_r0 + p_wr0;
}

CampaignSummary run_campaign(const CampaignConfig& config,
                             const std::filesystem::path& out_path, int workers,
                             const std::string& config_hash) {
  const ShotGenerator gen(config);
  if (workers < 1) {
    workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  }

  constexpr long kBlock = 1024;
  const long n_blocks = (config.n_shots + kBlock - 1) / kBlock;

  struct BlockResult {
    std::string text;
    long counts[4] = {0, 0, 0, 0};  // total, write, read, coincidences
    bool ready = false;
  };
  std::vector<BlockResult> blocks(static_cast<std::size_t>(n_blocks));
  std::atomic<long> next_block{0};
  std::mutex mtx;
  std::condition_variable cv;

  const Interval w = gen.write_window();
  const Interval r = gen.read_window();

  auto work = [&]() {
    while (true) {
      const long b = next_block.fetch_add(1);
      if (b >= n_blocks) return;
      BlockResult result;
      const long lo = b * kBlock;
      const long hi = std::min(config.n_shots, lo + kBlock);
      for (long i = lo; i < hi; ++i) {
        const ShotRecord rec = gen.simulate_shot(i);
        long in_w = 0, in_r = 0;
        for (const double t : rec.timestamps_us) {
          if (w.contains(t)) ++in_w;
          if (r.contains(t)) ++in_r;
        }
        result.counts[0] += static_cast<long>(rec.timestamps_us.size());
        result.counts[1] += in_w;
        result.counts[2] += in_r;
        result.counts[3] += (in_w > 0 && in_r > 0) ? 1 : 0;
        result.text += render_shot_record(rec);
      }
      {
        std::lock_guard<std::mutex> lock(mtx);
        blocks[static_cast<std::size_t>(b)] = std::move(result);
        blocks[static_cast<std::size_t>(b)].ready = true;
      }
      cv.notify_all();
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int i = 0; i < workers; ++i) pool.emplace_back(work);

  CampaignSummary summary;
  summary.n_shots = config.n_shots;
  summary.master_seed = config.master_seed;
  summary.shot_length_us = config.schedule.shot_length_us;
  summary.duty_cycle = config.duty_cycle;

  bool failed = false;
  std::string failure;
  {
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) {
      failed = true;
      failure = "cannot open " + out_path.string() + " for writing";
    } else {
      out << render_shot_header({config_hash, config.master_seed});
      for (long b = 0; b < n_blocks && !failed; ++b) {
        std::unique_lock<std::mutex> lock(mtx);
        cv.wait(lock, [&] { return blocks[static_cast<std::size_t>(b)].ready; });
        BlockResult block = std::move(blocks[static_cast<std::size_t>(b)]);
        lock.unlock();
        out << block.text;
        if (!out) {
          failed = true;
          failure = "write error on " + out_path.string();
          break;
        }
        summary.total_counts += block.counts[0];
        summary.write_window_counts += block.counts[1];
        summary.read_window_counts += block.counts[2];
        summary.coincidences += block.counts[3];
      }
    }
  }
  for (auto& t : pool) t.join();
  if (failed) {
    std::error_code ec;
    std::filesystem::remove(out_path, ec);
    throw std::runtime_error("run_campaign: " + failure);
  }

  summary.elsewhere_counts =
      summary.total_counts - summary.write_window_counts - summary.read_window_counts;
  const double shots = static_cast<double>(config.n_shots);
  if (w.length_us() > 0.0) {
    summary.write_window_rate_hz =
        summary.write_window_counts / (shots * units::us(w.length_us()));
  }
  if (r.length_us() > 0.0) {
    summary.read_window_rate_hz =
        summary.read_window_counts / (shots * units::us(r.length_us()));
  }
  summary.expected_coincidences =
      shots * expected_pair_coincidence_probability(config);
  summary.implied_wall_clock_s =
      shots * units::us(config.schedule.shot_length_us) / config.duty_cycle;
  return summary;
}

}  // namespace herald
