#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "cli.h"
#include "phonolid/classifier.h"
#include "phonolid/corpus.h"
#include "phonolid/error.h"
#include "phonolid/eval.h"
#include "phonolid/ngram.h"
#include "phonolid/rnnlm.h"

namespace py = pybind11;
using namespace phonolid;

namespace {

OovPolicy Oov(bool lenient) { return lenient ? OovPolicy::kLenient : OovPolicy::kStrict; }

std::vector<RankedLanguage> Rank(const ModelBank& bank, const Utterance& utt,
                                 const std::string& kind, double lambda, size_t nbest,
                                 bool lenient) {
  ScoreOptions options{ParseScoreKind(kind), lambda, Oov(lenient)};
  if (nbest == 0) return Classify(bank, utt, options).ranked;
  return ClassifyNbest(bank, utt, options, nbest);
}

}  // namespace

PYBIND11_MODULE(_phonolid, m) {
  m.doc() = "Phonotactic language identification: n-gram and recurrent phone LMs";

  py::register_exception<Error>(m, "PhonolidError", PyExc_RuntimeError);

  py::class_<PhoneAlphabet>(m, "PhoneAlphabet")
      .def(py::init<std::vector<std::string>>(), py::arg("tokens"))
      .def_property_readonly("tokens", &PhoneAlphabet::tokens)
      .def_property_readonly("end_id", &PhoneAlphabet::EndId)
      .def_property_readonly("begin_id", &PhoneAlphabet::BeginId)
      .def_property_readonly("unk_id", &PhoneAlphabet::UnkId)
      .def("hash", &PhoneAlphabet::Hash)
      .def("symbol", &PhoneAlphabet::Symbol, py::arg("id"))
      .def("encode",
           [](const PhoneAlphabet& a, const std::string& line, const std::string& id,
              bool lenient) { return EncodeUtterance(a, line, id, Oov(lenient)); },
           py::arg("line"), py::arg("source_id") = "", py::arg("lenient") = false)
      .def("decode", &DecodeUtterance, py::arg("utterance"))
      .def("__len__", &PhoneAlphabet::size)
      .def("__eq__", &PhoneAlphabet::operator==);

  py::class_<Utterance>(m, "Utterance")
      .def(py::init<std::vector<TokenId>, std::string>(), py::arg("phones"),
           py::arg("source_id") = "")
      .def_readwrite("phones", &Utterance::phones)
      .def_readwrite("source_id", &Utterance::source_id)
      .def("__len__", [](const Utterance& u) { return u.phones.size(); });

  py::class_<LabeledCorpus>(m, "LabeledCorpus")
      .def_readonly("alphabet", &LabeledCorpus::alphabet)
      .def_readonly("languages", &LabeledCorpus::languages)
      .def("num_utterances", &LabeledCorpus::NumUtterances)
      .def("__eq__", &LabeledCorpus::operator==);

  m.def("load_corpus",
        [](const std::filesystem::path& root, bool lenient) { return LoadCorpus(root, Oov(lenient)); },
        py::arg("root"), py::arg("lenient") = false);
  m.def("write_corpus", &WriteCorpus, py::arg("corpus"), py::arg("root"));
  m.def("generate_synthetic",
        [](size_t n_languages, size_t alphabet_size, int order, size_t utts_per_language,
           size_t mean_length, uint64_t seed) {
          return GenerateSynthetic({n_languages, alphabet_size, order, utts_per_language,
                                    mean_length, seed})
              .corpus;
        },
        py::arg("n_languages") = 5, py::arg("alphabet_size") = 40, py::arg("order") = 2,
        py::arg("utts_per_language") = 375, py::arg("mean_length") = 100,
        py::arg("seed") = 7);

  py::class_<NgramModel>(m, "NgramModel")
      .def_property_readonly("order", &NgramModel::order)
      .def_property_readonly("alphabet", &NgramModel::alphabet)
      .def("prob",
           [](const NgramModel& model, const std::vector<TokenId>& history, TokenId w) {
             return model.Prob(history, w);
           },
           py::arg("history"), py::arg("w"))
      .def("logprob",
           [](const NgramModel& model, const Utterance& u, bool lenient) {
             SequenceScore s = SequenceLogProb(model, u, Oov(lenient));
             return py::make_tuple(s.logprob, s.n_predicted);
           },
           py::arg("utterance"), py::arg("lenient") = false)
      .def("perplexity",
           [](const NgramModel& model, const Utterance& u, bool lenient) {
             return NgramPerplexity(model, u, Oov(lenient));
           },
           py::arg("utterance"), py::arg("lenient") = false)
      .def("save", [](const NgramModel& model, const std::filesystem::path& p) { SaveArpa(model, p); },
           py::arg("path"));

  m.def("train_ngram",
        [](const PhoneAlphabet& alphabet, const std::vector<Utterance>& train, int order,
           const std::string& smoothing, double k) {
          return TrainNgram(alphabet, train, order, ParseSmoothing(smoothing, k));
        },
        py::arg("alphabet"), py::arg("train"), py::arg("order") = 3,
        py::arg("smoothing") = "witten_bell", py::arg("k") = 1.0);
  m.def("load_ngram", [](const std::filesystem::path& p) { return LoadArpa(p); }, py::arg("path"));

  py::class_<RnnLm>(m, "RnnLm")
      .def_property_readonly("hidden_size", &RnnLm::hidden_size)
      .def_property_readonly("num_classes",
                             [](const RnnLm& model) { return model.classes().num_classes(); })
      .def("logprob", &RnnSequenceLogProb, py::arg("utterance"))
      .def("perplexity", &RnnPerplexity, py::arg("utterance"))
      .def("entropy",
           [](const RnnLm& model, const std::vector<Utterance>& utts) {
             return RnnEntropy(model, utts);
           },
           py::arg("utterances"))
      .def("save", [](const RnnLm& model, const std::filesystem::path& p) { SaveRnnLm(model, p); },
           py::arg("path"));

  m.def("train_rnnlm",
        [](const PhoneAlphabet& alphabet, const std::vector<Utterance>& train,
           const std::vector<Utterance>& valid, int hidden_size, int n_classes, int bptt_steps,
           int max_epochs, uint64_t seed) {
          TrainingConfig cfg;
          cfg.bptt_steps = bptt_steps;
          cfg.max_epochs = max_epochs;
          cfg.seed = seed;
          cfg.Validate();
          if (n_classes == 0) n_classes = DefaultClassCount(alphabet);
          RnnLm init = InitRnnLm(alphabet, hidden_size, AssignClasses(alphabet, train, n_classes), cfg);
          py::gil_scoped_release release;
          return TrainRnnLm(train, valid, std::move(init), cfg).model;
        },
        py::arg("alphabet"), py::arg("train"), py::arg("valid"), py::arg("hidden_size") = 40,
        py::arg("n_classes") = 0, py::arg("bptt_steps") = 4, py::arg("max_epochs") = 30,
        py::arg("seed") = 1);
  m.def("load_rnnlm", [](const std::filesystem::path& p) { return LoadRnnLm(p); }, py::arg("path"));

  py::class_<ModelBank>(m, "ModelBank")
      .def_readonly("alphabet", &ModelBank::alphabet)
      .def_readonly("metadata", &ModelBank::metadata)
      .def_property_readonly("languages",
                             [](const ModelBank& bank) {
                               std::vector<std::string> out;
                               for (const auto& [lang, entry] : bank.entries) out.push_back(lang);
                               return out;
                             })
      .def("has_ngram", &ModelBank::HasNgram)
      .def("has_rnn", &ModelBank::HasRnn);
  m.def("load_bank", &LoadBank, py::arg("dir"));

  m.def("classify",
        [](const ModelBank& bank, const Utterance& utt, const std::string& kind, double lambda,
           size_t nbest, bool lenient) {
          std::vector<std::pair<std::string, double>> out;
          for (const auto& r : Rank(bank, utt, kind, lambda, nbest, lenient))
            out.emplace_back(r.language, r.score);
          return out;
        },
        py::arg("bank"), py::arg("utterance"), py::arg("kind") = "ngram_pp",
        py::arg("lambda_") = 0.5, py::arg("nbest") = 0, py::arg("lenient") = false,
        "Ranked (language, score) pairs, best first; nbest = 0 returns all.");

  m.def("fuse_scores", &FuseScores, py::arg("ngram_pp"), py::arg("rnn_pp"), py::arg("lambda_"));

  m.def("summarize",
        [](const std::map<std::string, double>& per_language) {
          AccuracySummary s = Summarize(per_language);
          return py::make_tuple(s.min, s.max, s.avg);
        },
        py::arg("per_language"));

  m.def("run_cli",
        [](const std::vector<std::string>& args) {
          std::ostringstream out, err;
          int code;
          {
            py::gil_scoped_release release;
            code = cli::Run(args, out, err);
          }
          return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs a phonolid command; returns (exit_code, stdout, stderr).");
}
