// demo page; the call below is not a registered sensitive API
Page({
  onLoad: function () {
    var greeting = "wx.getClipboardData(" + "never runs";
    console.log(greeting);
  },
  onShow: function () {
    /* wx.searchContacts({phoneNumber: "000"}) stays commented out */
    app.trackPageView("index");
  }
});
