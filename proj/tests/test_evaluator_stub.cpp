// Minimal external evaluator used by tests: reads request lines on stdin and
// answers on stdout per the wire protocol. The first argument picks the
// behavior:
//   echo       -> accuracy 50.0 with a fake measured latency
//   surrogate  -> the built-in synthetic accuracy model
//   malformed  -> a line that is not valid JSON
//   wrong-id   -> ok response with a mismatched id
//   crash      -> exits after the first request
//   hang       -> reads but never answers

#include <chrono>
#include <cstdio>
#include <iostream>
#include <string>
#include <thread>

#include "smnas/evaluator.hpp"

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "echo";
  std::string line;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    if (mode == "hang") {
      std::this_thread::sleep_for(std::chrono::seconds(3600));
      continue;
    }
    if (mode == "malformed") {
      std::cout << "this is not json\n" << std::flush;
      continue;
    }
    smnas::EvalRequest req;
    try {
      req = smnas::decode_request(line);
    } catch (const std::exception& e) {
      smnas::EvalResponse bad;
      bad.id = "unknown";
      bad.status = smnas::RecordStatus::failed;
      bad.message = e.what();
      std::cout << smnas::encode_response(bad) << "\n" << std::flush;
      continue;
    }
    smnas::EvalResponse resp;
    if (mode == "surrogate") {
      resp = smnas::synthetic_accuracy(req, smnas::SurrogateProfile::defaults());
    } else {
      resp.id = mode == "wrong-id" ? req.id + "-oops" : req.id;
      resp.status = smnas::RecordStatus::ok;
      resp.accuracy = 50.0;
      resp.measured_latency_ms = 12.5;
    }
    std::cout << smnas::encode_response(resp) << "\n" << std::flush;
    if (mode == "crash") return 0;
  }
  return 0;
}
