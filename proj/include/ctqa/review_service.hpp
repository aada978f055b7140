#pragma once

// HTTP/1.1 JSON service over a pipeline output directory: montage listing,
// verdict submission into verdicts.jsonl, merged report and finalize.

#include <functional>
#include <memory>
#include <mutex>
#include <string>

#include <json.hpp>

namespace httplib {
class Server;
}

namespace ctqa {

struct ReviewServiceOptions {
  std::string output_root;
  bool blind = false;
  int default_page_size = 50;
  std::function<std::string()> clock;  // fills missing verdict timestamps; defaults to UTC now
};

class ReviewService {
 public:
  explicit ReviewService(ReviewServiceOptions options);
  ~ReviewService();
  ReviewService(const ReviewService&) = delete;
  ReviewService& operator=(const ReviewService&) = delete;

  /// Binds to `host:port` (port 0 picks a free one) and returns the port, or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop(); blocks.
  bool listen();
  void stop();

  /// Serializes appends and finalize. Holding it makes finalize answer 409.
  std::unique_lock<std::mutex> write_lock();

  // Handlers, usable without a socket. Return (status, body).
  std::pair<int, nlohmann::json> list_scans(int page, int page_size, const std::string& filter) const;
  std::pair<int, nlohmann::json> post_verdict(const std::string& body);
  std::pair<int, nlohmann::json> report() const;
  std::pair<int, nlohmann::json> finalize();

 private:
  void install_routes();
  bool known_scan(const std::string& scan_id) const;

  ReviewServiceOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::mutex write_mutex_;
};

}  // namespace ctqa
