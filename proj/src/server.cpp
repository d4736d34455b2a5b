#include "emoreason/server.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <map>

#include "httplib.h"

#include "emoreason/error.hpp"
#include "emoreason/hashing.hpp"
#include "emoreason/json_util.hpp"

namespace emoreason {

using nlohmann::json;
using nlohmann::ordered_json;

TaskOrder task_order_from_string(std::string_view s) {
  if (s == "sequential") return TaskOrder::sequential;
  if (s == "random") return TaskOrder::random;
  if (s == "stratified") return TaskOrder::stratified;
  fail(Errc::invalid_argument, "unknown task order '" + std::string(s) + "'");
}

namespace {

// Fisher-Yates over splitmix64 so the order is the same on every platform.
template <typename T>
void seeded_shuffle(std::vector<T>& items, std::uint64_t seed) {
  std::uint64_t state = seed;
  for (std::size_t i = items.size(); i > 1; --i) {
    state = splitmix64(state);
    std::swap(items[i - 1], items[state % i]);
  }
}

std::string utc_timestamp() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ApiResponse json_response(int status, const ordered_json& body) { return {status, dump_line(body)}; }

ApiResponse field_errors(const std::vector<FieldError>& errors) {
  ordered_json body;
  body["error"] = "validation";
  body["fields"] = ordered_json::array();
  for (const auto& e : errors) body["fields"].push_back({{"field", e.field}, {"message", e.message}});
  return json_response(422, body);
}

}  // namespace

std::vector<AnnotationTask> build_tasks(const std::vector<AugmentedRecord>& records, const TaskOptions& options) {
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  if (options.order == TaskOrder::random) {
    seeded_shuffle(order, options.seed);
  } else if (options.order == TaskOrder::stratified) {
    std::map<std::string, std::vector<std::size_t>> strata;
    for (auto i : order) strata[records[i].gold_label.value_or("")].push_back(i);
    for (auto& [_, members] : strata) seeded_shuffle(members, options.seed);
    order.clear();
    for (std::size_t round = 0; order.size() < records.size(); ++round) {
      for (const auto& [_, members] : strata) {
        if (round < members.size()) order.push_back(members[round]);
      }
    }
  }
  if (options.sample_limit && order.size() > *options.sample_limit) order.resize(*options.sample_limit);

  std::vector<AnnotationTask> tasks;
  for (auto i : order) {
    const auto& r = records[i];
    for (std::size_t rank = 0; rank < r.top.size(); ++rank) {
      const auto& entry = r.top[rank];
      AnnotationTask t;
      t.sample_id = r.id;
      t.label_rank = static_cast<int>(rank) + 1;
      t.text = r.text;
      if (entry.context_index && *entry.context_index >= 0 &&
          static_cast<std::size_t>(*entry.context_index) < r.contexts.size()) {
        t.context = r.contexts[*entry.context_index];
      }
      t.label = entry.label;
      t.explanation = entry.explanation;
      t.gold_label = r.gold_label;
      tasks.push_back(std::move(t));
    }
  }
  return tasks;
}

ordered_json to_json(const AnnotationTask& t) {
  ordered_json j;
  j["sample_id"] = t.sample_id;
  j["label_rank"] = t.label_rank;
  j["text"] = t.text;
  j["context"] = t.context;
  j["label"] = t.label;
  j["explanation"] = t.explanation;
  j["gold_label"] = t.gold_label ? ordered_json(*t.gold_label) : ordered_json(nullptr);
  j["questions"] = kAnnotationQuestions;
  j["q2_maybe_reading"] = kQ2MaybeReading;
  return j;
}

AnnotationService::AnnotationService(const std::vector<AugmentedRecord>& records, AnnotationStore& store,
                                     const TaskOptions& options)
    : tasks_(build_tasks(records, options)), store_(store) {
  for (const auto& r : records) max_rank_ = std::max(max_rank_, static_cast<int>(r.top.size()));
}

ApiResponse AnnotationService::next_task(const std::string& annotator_id) const {
  if (annotator_id.empty()) return field_errors({{"annotator", "query parameter is required"}});
  std::size_t done = 0;
  const AnnotationTask* next = nullptr;
  for (const auto& t : tasks_) {
    if (store_.has({t.sample_id, t.label_rank, annotator_id})) {
      ++done;
    } else if (!next) {
      next = &t;
    }
  }
  if (!next) return {204, ""};
  auto body = to_json(*next);
  body["progress"] = {{"done", done}, {"total", tasks_.size()}};
  return json_response(200, body);
}

ApiResponse AnnotationService::submit(const std::string& body) {
  auto j = json::parse(body, nullptr, false);
  if (j.is_discarded()) return field_errors({{"body", "not valid JSON"}});
  auto parsed = annotation_from_json(j, max_rank_);
  if (auto* errors = std::get_if<std::vector<FieldError>>(&parsed)) return field_errors(*errors);
  auto record = std::get<AnnotationRecord>(std::move(parsed));
  bool known = std::any_of(tasks_.begin(), tasks_.end(), [&](const AnnotationTask& t) {
    return t.sample_id == record.sample_id && t.label_rank == record.label_rank;
  });
  if (!known) return field_errors({{"sample_id", "no task for this sample_id and label_rank"}});
  if (record.timestamp.empty()) record.timestamp = utc_timestamp();
  auto previous = store_.submit(record);
  ordered_json out;
  out["status"] = "ok";
  out["replaced"] = previous.has_value();
  out["record"] = to_json(record);
  return json_response(200, out);
}

ApiResponse AnnotationService::summary() const {
  auto records = store_.records();
  return json_response(200, to_json(aggregate_annotations(records)));
}

namespace {

constexpr std::string_view kPlaceholderPage = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>emoreason annotation</title></head>
<body>
<h1>emoreason annotation API</h1>
<p>No UI bundle is being served. Start the server with <code>--ui-dir</code> to serve one.</p>
<ul>
<li><code>GET /api/tasks/next?annotator=ID</code></li>
<li><code>POST /api/annotations</code></li>
<li><code>GET /api/summary</code></li>
</ul>
</body></html>
)";

}  // namespace

struct AnnotationServer::Impl {
  AnnotationService& service;
  httplib::Server http;

  explicit Impl(AnnotationService& s) : service(s) {}
};

AnnotationServer::AnnotationServer(AnnotationService& service, std::optional<std::filesystem::path> ui_dir)
    : impl_(std::make_unique<Impl>(service)) {
  auto& http = impl_->http;
  // httplib's defaults include SO_REUSEPORT, which would let a second server
  // share the port instead of failing.
  http.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof yes);
  });
  auto send = [](httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    if (!r.body.empty()) res.set_content(r.body, "application/json");
  };
  http.Get("/api/tasks/next", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, impl_->service.next_task(req.get_param_value("annotator")));
  });
  http.Post("/api/annotations", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, impl_->service.submit(req.body));
  });
  http.Get("/api/summary", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, impl_->service.summary());
  });
  if (ui_dir && std::filesystem::is_directory(*ui_dir)) {
    http.set_mount_point("/", ui_dir->string());
  } else {
    http.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(std::string(kPlaceholderPage), "text/html; charset=utf-8");
    });
  }
  http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string message = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      message = e.what();
    } catch (...) {
    }
    res.status = 500;
    res.set_content(dump_line(json{{"error", message}}), "application/json");
  });
}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::bind(const std::string& host, int port) {
  if (port == 0) {
    int bound = impl_->http.bind_to_any_port(host);
    if (bound < 0) fail(Errc::io, "cannot bind " + host);
    return bound;
  }
  if (!impl_->http.bind_to_port(host, port)) {
    fail(Errc::io, "cannot bind " + host + ":" + std::to_string(port) + " (port in use?)");
  }
  return port;
}

void AnnotationServer::listen() {
  impl_->http.listen_after_bind();
  impl_->service.store().flush();
}

void AnnotationServer::stop() {
  if (impl_) impl_->http.stop();
}

bool AnnotationServer::running() const { return impl_->http.is_running(); }

}  // namespace emoreason
