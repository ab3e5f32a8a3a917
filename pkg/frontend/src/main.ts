import { ApiClient } from "./api.js";
import { createApp } from "./app.js";

const root = document.getElementById("app");
if (root) {
  const api = new ApiClient("");
  const reviewerId = localStorage.getItem("reviewer_id") ?? `reviewer-${crypto.randomUUID().slice(0, 8)}`;
  localStorage.setItem("reviewer_id", reviewerId);
  const app = createApp(root, api, reviewerId);
  void app.reload();
}
