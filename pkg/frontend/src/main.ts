import { ConsoleApp } from "./app";

const root = document.getElementById("app");
if (root !== null) {
  const base = window.location.origin.startsWith("http")
    ? window.location.origin
    : "http://127.0.0.1:8700";
  new ConsoleApp(root, base);
}
